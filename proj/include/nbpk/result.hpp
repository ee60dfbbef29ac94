#pragma once

#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

namespace nbpk {

template <class E>
struct Unexpected {
  E error;
};

template <class E>
Unexpected<std::decay_t<E>> unexpected(E&& e) {
  return {std::forward<E>(e)};
}

class BadResultAccess : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Either a value or a classified error. A small stand-in for std::expected.
template <class T, class E>
class [[nodiscard]] Result {
 public:
  using value_type = T;
  using error_type = E;

  Result(const T& v) : storage_(std::in_place_index<0>, v) {}
  Result(T&& v) : storage_(std::in_place_index<0>, std::move(v)) {}
  template <class G>
  Result(Unexpected<G> e) : storage_(std::in_place_index<1>, std::move(e.error)) {}

  bool ok() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return ok(); }

  T& value() & {
    check();
    return std::get<0>(storage_);
  }
  const T& value() const& {
    check();
    return std::get<0>(storage_);
  }
  T&& value() && {
    check();
    return std::get<0>(std::move(storage_));
  }

  const E& error() const {
    if (ok()) throw BadResultAccess("Result holds a value, not an error");
    return std::get<1>(storage_);
  }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  // By value, so `for (auto& x : *make())` owns what it iterates.
  T operator*() && { return std::move(*this).value(); }

 private:
  void check() const {
    if (!ok()) throw BadResultAccess("Result holds an error");
  }

  std::variant<T, E> storage_;
};

/// Result for operations that produce nothing on success.
struct Ok {};

}  // namespace nbpk

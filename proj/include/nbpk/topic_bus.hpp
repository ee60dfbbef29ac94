#pragma once

// In-process typed publish/subscribe bus. Topic names follow the ROS names the
// bridge mirrors ("camera/image_raw", "motion/state", ...).

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <typeindex>
#include <utility>
#include <vector>

namespace nbpk {

struct QueuePolicy {
  enum class Kind { LatestWins, BoundedFifo };
  Kind kind = Kind::LatestWins;
  std::size_t depth = 1;

  static QueuePolicy latest_wins() { return {Kind::LatestWins, 1}; }
  static QueuePolicy bounded_fifo(std::size_t depth) { return {Kind::BoundedFifo, depth}; }
};

class TopicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A subscriber's private queue. publish() never waits on it.
template <class T>
class Subscription {
 public:
  explicit Subscription(QueuePolicy policy) : policy_(policy) {
    if (policy_.kind == QueuePolicy::Kind::LatestWins) policy_.depth = 1;
    if (policy_.depth == 0) throw TopicError("queue depth must be positive");
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mutex_);
    return pop_locked();
  }

  std::optional<T> wait_pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty(); });
    return pop_locked();
  }

  /// Messages discarded because the queue was full (BoundedFifo) or superseded (LatestWins).
  std::uint64_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

  std::uint64_t received() const {
    std::lock_guard lock(mutex_);
    return received_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
  }

  void offer(const T& msg) {
    {
      std::lock_guard lock(mutex_);
      ++received_;
      if (queue_.size() >= policy_.depth) {
        queue_.pop_front();
        ++dropped_;
      }
      queue_.push_back(msg);
    }
    cv_.notify_one();
  }

 private:
  std::optional<T> pop_locked() {
    if (queue_.empty()) return std::nullopt;
    T msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
  }

  QueuePolicy policy_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> queue_;
  std::uint64_t dropped_ = 0;
  std::uint64_t received_ = 0;
};

class TopicBus;

namespace detail {

struct TopicBase {
  explicit TopicBase(std::type_index t) : type(t) {}
  virtual ~TopicBase() = default;
  std::type_index type;
};

template <class T>
struct TypedTopic : TopicBase {
  TypedTopic() : TopicBase(typeid(T)) {}

  std::mutex mutex;
  std::vector<std::weak_ptr<Subscription<T>>> subscribers;
  std::map<std::uint64_t, std::function<void(const T&)>> taps;
  std::uint64_t next_tap = 0;
  std::uint64_t published = 0;
};

}  // namespace detail

/// Synchronous observer on a topic. Destroying it waits for any in-flight call.
class Tap {
 public:
  Tap() = default;
  Tap(Tap&& other) noexcept : remove_(std::exchange(other.remove_, nullptr)) {}
  Tap& operator=(Tap&& other) noexcept {
    if (this != &other) {
      reset();
      remove_ = std::exchange(other.remove_, nullptr);
    }
    return *this;
  }
  ~Tap() { reset(); }

  void reset() {
    if (remove_) std::exchange(remove_, nullptr)();
  }

 private:
  friend class TopicBus;
  explicit Tap(std::function<void()> remove) : remove_(std::move(remove)) {}
  std::function<void()> remove_;
};

class TopicBus {
 public:
  /// Registers `topic` with payload type T; throws TopicError on a type clash.
  template <class T>
  void advertise(const std::string& topic) {
    (void)topic_for<T>(topic);
  }

  template <class T>
  std::shared_ptr<Subscription<T>> subscribe(const std::string& topic, QueuePolicy policy) {
    auto t = topic_for<T>(topic);
    auto sub = std::make_shared<Subscription<T>>(policy);
    std::lock_guard lock(t->mutex);
    std::erase_if(t->subscribers, [](const auto& w) { return w.expired(); });
    t->subscribers.push_back(sub);
    return sub;
  }

  /// Calls `fn` on the publisher's thread for every message. `fn` must not block
  /// or publish to the same topic.
  template <class T>
  [[nodiscard]] Tap tap(const std::string& topic, std::function<void(const T&)> fn) {
    auto t = topic_for<T>(topic);
    std::lock_guard lock(t->mutex);
    const auto id = t->next_tap++;
    t->taps.emplace(id, std::move(fn));
    return Tap([t, id] {
      std::lock_guard lock(t->mutex);
      t->taps.erase(id);
    });
  }

  /// Delivers to every current subscriber in publish order. Never blocks on a subscriber.
  template <class T>
  void publish(const std::string& topic, const T& msg) {
    auto t = topic_for<T>(topic);
    std::lock_guard lock(t->mutex);
    ++t->published;
    for (auto it = t->subscribers.begin(); it != t->subscribers.end();) {
      if (auto sub = it->lock()) {
        sub->offer(msg);
        ++it;
      } else {
        it = t->subscribers.erase(it);
      }
    }
    for (auto& [id, fn] : t->taps) fn(msg);
  }

  /// Number of messages published on `topic` so far (0 for unknown topics).
  std::uint64_t published_count(const std::string& topic) const {
    std::lock_guard lock(mutex_);
    auto it = topics_.find(topic);
    if (it == topics_.end()) return 0;
    return it->second.second(it->second.first.get());
  }

 private:
  template <class T>
  std::shared_ptr<detail::TypedTopic<T>> topic_for(const std::string& topic) {
    if (topic.empty()) throw TopicError("topic name must be non-empty");
    std::lock_guard lock(mutex_);
    auto it = topics_.find(topic);
    if (it == topics_.end()) {
      auto created = std::make_shared<detail::TypedTopic<T>>();
      topics_.emplace(topic, Entry{created, [](detail::TopicBase* b) {
                                     auto* typed = static_cast<detail::TypedTopic<T>*>(b);
                                     std::lock_guard l(typed->mutex);
                                     return typed->published;
                                   }});
      return created;
    }
    if (it->second.first->type != std::type_index(typeid(T)))
      throw TopicError("topic '" + topic + "' carries a different payload type");
    return std::static_pointer_cast<detail::TypedTopic<T>>(it->second.first);
  }

  using Entry = std::pair<std::shared_ptr<detail::TopicBase>,
                          std::uint64_t (*)(detail::TopicBase*)>;
  mutable std::mutex mutex_;
  std::map<std::string, Entry> topics_;
};

}  // namespace nbpk

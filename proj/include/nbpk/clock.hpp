#pragma once

#include <chrono>
#include <cstdint>

namespace nbpk {

/// Monotonic microseconds. CLOCK_MONOTONIC is system-wide on Linux, so values
/// from two processes on one host are comparable.
inline std::uint64_t now_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

inline std::uint64_t wall_clock_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

}  // namespace nbpk

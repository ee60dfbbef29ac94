#pragma once

// Keyboard stand-in for a joystick: keys nudge a normalized velocity command
// that is published periodically as a MotionRequest.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>

#include "nbpk/topic_bus.hpp"
#include "nbpk/wire.hpp"

namespace nbpk::teleop {

struct KeyBindings {
  char forward = 'w';
  char backward = 's';
  char left = 'a';
  char right = 'd';
  char turn_left = 'q';
  char turn_right = 'e';
  char stop = ' ';
  char exit = 'x';
};

struct TeleopState {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  double step = 0.1;
  bool exit_requested = false;
};

/// Applies one key. Components are clamped to [-1, 1]; unbound keys change nothing.
TeleopState map_key(TeleopState state, char key, const KeyBindings& keys = {});

/// WALK when any component is nonzero, STAND otherwise.
wire::MotionRequest to_request(const TeleopState& state);

/// Returns the next key, waiting at most the given time.
using KeySource = std::function<std::optional<char>(std::chrono::milliseconds)>;

struct TeleopOptions {
  double rate_hz = 10.0;
  /// Velocity change per key press.
  double step = 0.1;
  KeyBindings keys;
  double echo_period_s = 1.0;
  /// Stop after this long even without an exit key.
  std::optional<std::chrono::milliseconds> max_duration;
};

struct TeleopSummary {
  std::uint64_t periodic_published = 0;
  TeleopState final_state;
};

/// Publishes the command on "motion/request" at rate_hz until the exit key,
/// echoing the latest "motion/state" velocity to `echo` once per echo period.
/// Always finishes by publishing STAND.
TeleopSummary teleop_loop(TopicBus& bus, const KeySource& keys, const TeleopOptions& options,
                          std::ostream* echo = nullptr);

/// Puts stdin in non-canonical, no-echo mode for its lifetime.
class RawTerminal {
 public:
  RawTerminal();
  ~RawTerminal();
  RawTerminal(const RawTerminal&) = delete;
  RawTerminal& operator=(const RawTerminal&) = delete;

  bool active() const { return active_; }

 private:
  bool active_ = false;
  unsigned char saved_[64] = {};
};

/// Reads single keys from stdin with poll().
KeySource stdin_key_source();

}  // namespace nbpk::teleop

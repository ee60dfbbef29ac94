#include "nbpk/teleop.hpp"

#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nbpk/bridge.hpp"

namespace nbpk::teleop {

namespace {

// Snap to a 1e-6 grid so repeated 0.1 steps land on exact tenths.
double nudge(double value, double delta) {
  return std::clamp(std::round((value + delta) * 1e6) / 1e6, -1.0, 1.0);
}

}  // namespace

TeleopState map_key(TeleopState s, char key, const KeyBindings& keys) {
  if (key == keys.forward) {
    s.vx = nudge(s.vx, s.step);
  } else if (key == keys.backward) {
    s.vx = nudge(s.vx, -s.step);
  } else if (key == keys.left) {
    s.vy = nudge(s.vy, s.step);
  } else if (key == keys.right) {
    s.vy = nudge(s.vy, -s.step);
  } else if (key == keys.turn_left) {
    s.omega = nudge(s.omega, s.step);
  } else if (key == keys.turn_right) {
    s.omega = nudge(s.omega, -s.step);
  } else if (key == keys.stop) {
    s.vx = s.vy = s.omega = 0.0;
  } else if (key == keys.exit) {
    s.vx = s.vy = s.omega = 0.0;
    s.exit_requested = true;
  }
  return s;
}

wire::MotionRequest to_request(const TeleopState& s) {
  wire::MotionRequest r;
  if (s.vx == 0.0 && s.vy == 0.0 && s.omega == 0.0) return r;
  r.mode = wire::MotionMode::Walk;
  r.vx = static_cast<float>(std::clamp(s.vx, -1.0, 1.0));
  r.vy = static_cast<float>(std::clamp(s.vy, -1.0, 1.0));
  r.omega = static_cast<float>(std::clamp(s.omega, -1.0, 1.0));
  return r;
}

TeleopSummary teleop_loop(TopicBus& bus, const KeySource& keys, const TeleopOptions& options,
                          std::ostream* echo) {
  using clock = std::chrono::steady_clock;
  auto state_sub = bus.subscribe<bridge::MotionMsg>(bridge::kMotionTopic, QueuePolicy::latest_wins());
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(1.0 / options.rate_hz));
  const auto echo_period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(options.echo_period_s));
  const auto start = clock::now();
  auto next_tick = start + period;
  auto next_echo = start + echo_period;
  std::optional<bridge::MotionMsg> latest;

  TeleopSummary summary;
  TeleopState state;
  state.step = options.step;
  while (!state.exit_requested) {
    const auto now = clock::now();
    if (options.max_duration && now - start >= *options.max_duration) break;
    if (now >= next_tick) {
      bus.publish(bridge::kRequestTopic, to_request(state));
      ++summary.periodic_published;
      next_tick += period;
      continue;
    }
    if (auto msg = state_sub->try_pop()) latest = std::move(msg);
    if (echo && now >= next_echo) {
      *echo << "cmd vx=" << state.vx << " vy=" << state.vy << " omega=" << state.omega;
      if (latest) {
        *echo << " | robot vx=" << latest->value.velocity[0] << " vy=" << latest->value.velocity[1]
              << " omega=" << latest->value.velocity[2];
      } else {
        *echo << " | robot: no motion/state yet";
      }
      *echo << "\r\n" << std::flush;
      next_echo += echo_period;
    }
    auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_tick - now);
    if (auto key = keys(std::max(wait, std::chrono::milliseconds(0))))
      state = map_key(state, *key, options.keys);
  }
  state.vx = state.vy = state.omega = 0.0;
  bus.publish(bridge::kRequestTopic, wire::MotionRequest{});
  summary.final_state = state;
  return summary;
}

RawTerminal::RawTerminal() {
  static_assert(sizeof(termios) <= sizeof(saved_));
  if (!::isatty(STDIN_FILENO)) return;
  termios t{};
  if (::tcgetattr(STDIN_FILENO, &t) != 0) return;
  std::memcpy(saved_, &t, sizeof(t));
  t.c_lflag &= static_cast<tcflag_t>(~(ICANON | ECHO));
  t.c_cc[VMIN] = 0;
  t.c_cc[VTIME] = 0;
  active_ = ::tcsetattr(STDIN_FILENO, TCSANOW, &t) == 0;
}

RawTerminal::~RawTerminal() {
  if (!active_) return;
  termios t{};
  std::memcpy(&t, saved_, sizeof(t));
  ::tcsetattr(STDIN_FILENO, TCSANOW, &t);
}

KeySource stdin_key_source() {
  return [](std::chrono::milliseconds timeout) -> std::optional<char> {
    pollfd pfd{STDIN_FILENO, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return std::nullopt;
    char c = 0;
    if (::read(STDIN_FILENO, &c, 1) != 1) {
      // EOF on a closed stdin behaves like the exit key.
      return 'x';
    }
    return c;
  };
}

}  // namespace nbpk::teleop

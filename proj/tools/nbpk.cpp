// nbpk: robot emulator, bridge, benchmark, recorder, teleop and inertia tools.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "nbpk/bench.hpp"
#include "nbpk/bridge.hpp"
#include "nbpk/inertial.hpp"
#include "nbpk/log.hpp"
#include "nbpk/recorder.hpp"
#include "nbpk/robotsim.hpp"
#include "nbpk/teleop.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Blocks SIGINT/SIGTERM in every thread and turns them into a stop request.
class SignalStop {
 public:
  SignalStop() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
    waiter_ = std::jthread([this](std::stop_token st) {
      timespec poll{0, 100'000'000};
      while (!st.stop_requested()) {
        if (sigtimedwait(&set_, nullptr, &poll) > 0) {
          source_.request_stop();
          return;
        }
      }
    });
  }

  std::stop_token token() const { return source_.get_token(); }

  /// Sleeps until the signal arrives or `seconds` elapse (<= 0 waits for the signal only).
  void wait(double seconds) const {
    std::mutex m;
    std::condition_variable_any cv;
    std::unique_lock lock(m);
    auto token = source_.get_token();
    if (seconds > 0) {
      cv.wait_for(lock, token, std::chrono::duration<double>(seconds), [] { return false; });
    } else {
      cv.wait(lock, token, [] { return false; });
    }
  }

 private:
  sigset_t set_{};
  std::stop_source source_;
  std::jthread waiter_;
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void add_port(CLI::App* app, const std::string& name, std::uint16_t& port, const std::string& help) {
  app->add_option(name, port, help)->check(CLI::Range(1024, 65535))->capture_default_str();
}

int run_robot(const nbpk::robot::RobotConfig& cfg, double duration) {
  nbpk::robot::RobotSim robot(cfg);
  if (auto started = robot.start(); !started) {
    spdlog::error("robot: {}", started.error());
    return kExitRuntime;
  }
  SignalStop signals;
  signals.wait(duration);
  robot.stop();
  const auto c = robot.counters();
  std::cout << "images_sent=" << c.images_sent << " motion_sent=" << c.motion_sent
            << " commands_received=" << c.commands_received << '\n';
  return kExitOk;
}

nbpk::Result<nbpk::channel::Address, std::string> robot_address(const std::string& text) {
  return nbpk::channel::parse_address(text, nbpk::channel::kDefaultCommandPort);
}

int run_bridge(nbpk::bridge::BridgeConfig cfg, double duration) {
  nbpk::TopicBus bus;
  nbpk::bridge::Bridge bridge(cfg, bus);
  bridge.on_stats([](const nbpk::bridge::BridgeStats& s) {
    std::cout << nbpk::bridge::to_json_line(s) << std::endl;
  });
  if (auto started = bridge.start(); !started) {
    spdlog::error("bridge: {}", started.error());
    return kExitRuntime;
  }
  SignalStop signals;
  signals.wait(duration);
  bridge.stop();
  return kExitOk;
}

int run_inertia(const std::string& path, const std::string& base_path) {
  auto text = read_file(path);
  if (!text) {
    spdlog::error("inertia: cannot read {}", path);
    return kExitRuntime;
  }
  auto bodies = nbpk::inertial::bodies_from_json(*text);
  if (!bodies) {
    spdlog::error("inertia: {}", bodies.error());
    return kExitRuntime;
  }
  auto combined = nbpk::inertial::compose(*bodies);
  if (!combined) {
    spdlog::error("inertia: {}", combined.error());
    return kExitRuntime;
  }
  const auto report = nbpk::inertial::validate_inertia(combined->inertia, combined->mass);
  nlohmann::json out;
  out["bodies"] = bodies->size();
  out["composed"] = nlohmann::json::parse(nbpk::inertial::to_json(*combined));
  out["validation"] = {{"valid", report.valid()},
                       {"violations", report.violations},
                       {"leading_minors", report.leading_minors},
                       {"principal_moments", report.principal_moments}};
  if (!base_path.empty()) {
    auto base_text = read_file(base_path);
    auto base = base_text ? nbpk::inertial::bodies_from_json(*base_text)
                          : nbpk::Result<std::vector<nbpk::inertial::RigidBody>, std::string>(
                                nbpk::unexpected(std::string("cannot read " + base_path)));
    if (!base) {
      spdlog::error("inertia: {}", base.error());
      return kExitRuntime;
    }
    auto base_body = nbpk::inertial::compose(*base);
    auto shift = base_body ? nbpk::inertial::com_shift(*base_body, *combined)
                           : nbpk::Result<nbpk::inertial::Vec3, std::string>(nbpk::unexpected(base_body.error()));
    if (!shift) {
      spdlog::error("inertia: {}", shift.error());
      return kExitRuntime;
    }
    out["com_shift"] = {shift->x, shift->y, shift->z};
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int run_export(const std::string& log_path, const std::string& out_dir, long index) {
  auto reader = nbpk::recorder::LogReader::open(log_path);
  if (!reader) {
    spdlog::error("export: {}", reader.error().detail);
    return kExitRuntime;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  long image_index = 0;
  int written = 0;
  while (auto rec = reader->next()) {
    if (rec->stream_id != nbpk::wire::StreamId::Image) continue;
    const long current = image_index++;
    if (index >= 0 && current != index) continue;
    auto img = nbpk::recorder::image_from_payload(rec->payload);
    if (!img) {
      spdlog::warn("export: skipping malformed image record {}", current);
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06ld.ppm", current);
    const auto path = std::filesystem::path(out_dir) / name;
    if (auto ok = nbpk::recorder::export_ppm(*img, path); !ok) {
      spdlog::error("export: {}", ok.error());
      return kExitRuntime;
    }
    ++written;
  }
  if (reader->truncated()) spdlog::warn("export: log is truncated; exported the valid prefix");
  std::cout << "exported " << written << " frame(s) to " << out_dir << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  nbpk::configure_logging();
  CLI::App app{"nbpk - robot sensor-streaming bridge toolkit"};
  app.require_subcommand(1);

  // robot -------------------------------------------------------------------
  nbpk::robot::RobotConfig robot_cfg;
  double robot_duration = 0.0;
  auto* robot = app.add_subcommand("robot", "Run the robot-side emulator");
  robot->add_option("--fps", robot_cfg.fps, "Image frame rate")->check(CLI::Range(0.001, 60.0))->capture_default_str();
  robot->add_option("--width", robot_cfg.width, "Image width (even)")->capture_default_str();
  robot->add_option("--height", robot_cfg.height, "Image height")->capture_default_str();
  robot->add_option("--motion-rate", robot_cfg.motion_rate_hz, "Motion send rate in Hz")->check(CLI::PositiveNumber)->capture_default_str();
  robot->add_option("--frag-size", robot_cfg.frag_payload, "Fragment payload bytes")->check(CLI::Range(256, 65000))->capture_default_str();
  add_port(robot, "--image-port", robot_cfg.image_port, "Destination port for images");
  add_port(robot, "--motion-port", robot_cfg.motion_port, "Destination port for motion");
  add_port(robot, "--command-port", robot_cfg.command_port, "Local port for commands");
  robot->add_option("--peer", robot_cfg.peer_host, "Bridge host")->capture_default_str();
  robot->add_option("--duration", robot_duration, "Stop after N seconds (default: until Ctrl-C)");

  // bridge ------------------------------------------------------------------
  nbpk::bridge::BridgeConfig bridge_cfg;
  std::string bridge_robot = "127.0.0.1:10023";
  std::uint64_t bridge_timeout_ms = 0;
  double bridge_duration = 0.0;
  auto* bridge = app.add_subcommand("bridge", "Run the backpack-side bridge; prints stats as JSON lines");
  add_port(bridge, "--image-port", bridge_cfg.image_port, "Image listen port");
  add_port(bridge, "--motion-port", bridge_cfg.motion_port, "Motion listen port");
  bridge->add_option("--robot", bridge_robot, "Robot command address host[:port]")->capture_default_str();
  bridge->add_option("--stats-period", bridge_cfg.stats_period_s, "Stats period in seconds")->check(CLI::PositiveNumber)->capture_default_str();
  bridge->add_option("--timeout-ms", bridge_timeout_ms, "Reassembly inactivity timeout (0 disables)")->capture_default_str();
  bridge->add_option("--duration", bridge_duration, "Stop after N seconds (default: until Ctrl-C)");

  // bench -------------------------------------------------------------------
  nbpk::bench::Scenario scenario;
  std::string bench_out;
  std::string bench_mode = "sim";
  auto* bench = app.add_subcommand("bench", "Run a benchmark scenario and write a JSON report");
  bench->add_option("--duration", scenario.duration_s, "Scenario length in seconds")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--fps", scenario.fps, "Image frame rate")->check(CLI::Range(0.001, 60.0))->capture_default_str();
  bench->add_option("--width", scenario.width, "Image width")->capture_default_str();
  bench->add_option("--height", scenario.height, "Image height")->capture_default_str();
  bench->add_option("--frag-size", scenario.frag_payload, "Fragment payload bytes")->check(CLI::Range(256, 65000))->capture_default_str();
  bench->add_option("--loss", scenario.impairment.loss_p, "Per-packet loss probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  bench->add_option("--dup", scenario.impairment.dup_p, "Per-packet duplication probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  bench->add_option("--reorder", scenario.impairment.reorder_p, "Per-packet reorder probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  bench->add_option("--reorder-depth", scenario.impairment.reorder_depth, "Slots a reordered packet is held")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  bench->add_option("--delay-us", scenario.impairment.base_delay_us, "Base one-way delay")->capture_default_str();
  bench->add_option("--jitter-us", scenario.impairment.jitter_us, "Uniform extra delay bound")->capture_default_str();
  bench->add_option("--seed", scenario.seed, "Impairment PRNG seed")->capture_default_str();
  bench->add_option("--mode", bench_mode, "sim (virtual clock) or loopback (real UDP)")->check(CLI::IsMember({"sim", "loopback"}))->capture_default_str();
  bench->add_option("--out", bench_out, "Write report JSON here (default: stdout)");

  // record ------------------------------------------------------------------
  std::string record_out;
  double record_duration = 10.0;
  nbpk::bridge::BridgeConfig record_cfg;
  std::string record_robot = "127.0.0.1:10023";
  auto* record = app.add_subcommand("record", "Run a bridge and log its topics to an .nbl file");
  record->add_option("--out", record_out, "Log file path")->required();
  record->add_option("--duration", record_duration, "Seconds to record")->check(CLI::PositiveNumber)->capture_default_str();
  add_port(record, "--image-port", record_cfg.image_port, "Image listen port");
  add_port(record, "--motion-port", record_cfg.motion_port, "Motion listen port");
  record->add_option("--robot", record_robot, "Robot command address host[:port]")->capture_default_str();

  // replay ------------------------------------------------------------------
  std::string replay_path;
  std::string replay_speed = "1";
  bool replay_quiet = false;
  auto* replay = app.add_subcommand("replay", "Republish a log on its original topics");
  replay->add_option("log", replay_path, "Log file")->required()->check(CLI::ExistingFile);
  replay->add_option("--speed", replay_speed, "Speed multiplier, or 'max'")->capture_default_str();
  replay->add_flag("--quiet", replay_quiet, "Only print the summary");

  // export ------------------------------------------------------------------
  std::string export_log, export_dir = ".";
  long export_index = -1;
  auto* exporter = app.add_subcommand("export", "Convert logged YUV422 images to PPM files");
  exporter->add_option("log", export_log, "Log file")->required()->check(CLI::ExistingFile);
  exporter->add_option("--out-dir", export_dir, "Output directory")->capture_default_str();
  exporter->add_option("--index", export_index, "Export only the N-th image (0-based)");

  // teleop ------------------------------------------------------------------
  nbpk::teleop::TeleopOptions teleop_opts;
  nbpk::bridge::BridgeConfig teleop_cfg;
  std::string teleop_robot = "127.0.0.1:10023";
  auto* teleop = app.add_subcommand("teleop", "Drive the robot from the keyboard");
  teleop->add_option("--robot", teleop_robot, "Robot command address host[:port]")->capture_default_str();
  add_port(teleop, "--image-port", teleop_cfg.image_port, "Image listen port");
  add_port(teleop, "--motion-port", teleop_cfg.motion_port, "Motion listen port");
  teleop->add_option("--rate", teleop_opts.rate_hz, "Command publish rate in Hz")->check(CLI::Range(0.1, 100.0))->capture_default_str();
  teleop->add_option("--step", teleop_opts.step, "Velocity change per key press")->check(CLI::Range(0.001, 1.0))->capture_default_str();
  teleop->add_option("--key-forward", teleop_opts.keys.forward, "Key for +vx")->capture_default_str();
  teleop->add_option("--key-backward", teleop_opts.keys.backward, "Key for -vx")->capture_default_str();
  teleop->add_option("--key-left", teleop_opts.keys.left, "Key for +vy")->capture_default_str();
  teleop->add_option("--key-right", teleop_opts.keys.right, "Key for -vy")->capture_default_str();
  teleop->add_option("--key-turn-left", teleop_opts.keys.turn_left, "Key for +omega")->capture_default_str();
  teleop->add_option("--key-turn-right", teleop_opts.keys.turn_right, "Key for -omega")->capture_default_str();
  teleop->add_option("--key-exit", teleop_opts.keys.exit, "Key that stands and exits")->capture_default_str();

  // inertia -----------------------------------------------------------------
  std::string inertia_path, inertia_base;
  auto* inertia = app.add_subcommand("inertia", "Compose rigid bodies from JSON and validate the result");
  inertia->add_option("bodies", inertia_path, "JSON body or array of bodies")->required()->check(CLI::ExistingFile);
  inertia->add_option("--base", inertia_base, "Base body JSON; also report the CoM shift")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*robot) {
      if (auto valid = nbpk::robot::validate(robot_cfg); !valid) {
        std::cerr << "robot: " << valid.error() << '\n';
        return kExitUsage;
      }
      return run_robot(robot_cfg, robot_duration);
    }
    if (*bridge) {
      auto addr = robot_address(bridge_robot);
      if (!addr) {
        std::cerr << "bridge: " << addr.error() << '\n';
        return kExitUsage;
      }
      bridge_cfg.robot = *addr;
      bridge_cfg.reassembly_timeout_us = bridge_timeout_ms * 1000;
      if (auto valid = nbpk::bridge::validate(bridge_cfg); !valid) {
        std::cerr << "bridge: " << valid.error() << '\n';
        return kExitUsage;
      }
      return run_bridge(bridge_cfg, bridge_duration);
    }
    if (*bench) {
      if (auto valid = nbpk::bench::validate(scenario); !valid) {
        std::cerr << "bench: " << valid.error() << '\n';
        return kExitUsage;
      }
      const auto& imp = scenario.impairment;
      if (bench_mode == "loopback" &&
          (imp.loss_p > 0 || imp.dup_p > 0 || imp.reorder_p > 0 || imp.base_delay_us > 0 || imp.jitter_us > 0)) {
        std::cerr << "bench: impairment options apply to --mode sim only; loopback measures the real link\n";
        return kExitUsage;
      }
      nbpk::bench::Report report;
      if (bench_mode == "loopback") {
        auto r = nbpk::bench::run_loopback(scenario);
        if (!r) {
          spdlog::error("bench: {}", r.error());
          return kExitRuntime;
        }
        report = *r;
      } else {
        report = nbpk::bench::run_scenario(scenario);
      }
      if (bench_out.empty()) {
        std::cout << nbpk::bench::to_json(report) << '\n';
      } else if (auto ok = nbpk::bench::write_report(report, bench_out); !ok) {
        spdlog::error("bench: {}", ok.error());
        return kExitRuntime;
      }
      return kExitOk;
    }
    if (*record) {
      auto addr = robot_address(record_robot);
      if (!addr) {
        std::cerr << "record: " << addr.error() << '\n';
        return kExitUsage;
      }
      record_cfg.robot = *addr;
      nbpk::TopicBus bus;
      nbpk::bridge::Bridge br(record_cfg, bus);
      if (auto started = br.start(); !started) {
        spdlog::error("record: {}", started.error());
        return kExitRuntime;
      }
      SignalStop signals;
      auto summary = nbpk::recorder::record(
          bus, record_out, std::chrono::milliseconds(static_cast<long>(record_duration * 1000)),
          signals.token());
      br.stop();
      if (!summary) {
        spdlog::error("record: {}", summary.error().detail);
        return kExitRuntime;
      }
      std::cout << "records=" << summary->records << " bytes=" << summary->bytes << '\n';
      if (summary->error) {
        spdlog::error("record: {}", summary->error->detail);
        return kExitRuntime;
      }
      return kExitOk;
    }
    if (*replay) {
      nbpk::recorder::ReplayOptions opts;
      if (replay_speed == "max") {
        opts.speed = std::nullopt;
      } else {
        try {
          opts.speed = std::stod(replay_speed);
        } catch (const std::exception&) {
          opts.speed = -1.0;
        }
        if (!(*opts.speed > 0.0)) {
          std::cerr << "replay: --speed must be a positive number or 'max'\n";
          return kExitUsage;
        }
      }
      nbpk::TopicBus bus;
      std::vector<nbpk::Tap> taps;
      if (!replay_quiet) {
        taps.push_back(bus.tap<nbpk::bridge::ImageMsg>(nbpk::bridge::kImageTopic, [](const auto& m) {
          std::cout << nbpk::bridge::kImageTopic << " seq=" << m.value.seq << " " << m.value.width
                    << "x" << m.value.height << " t=" << m.value.timestamp_us << '\n';
        }));
        taps.push_back(bus.tap<nbpk::bridge::MotionMsg>(nbpk::bridge::kMotionTopic, [](const auto& m) {
          std::cout << nbpk::bridge::kMotionTopic << " seq=" << m.value.seq << " vx=" << m.value.velocity[0]
                    << " t=" << m.value.timestamp_us << '\n';
        }));
        taps.push_back(bus.tap<nbpk::wire::MotionRequest>(nbpk::bridge::kRequestTopic, [](const auto& r) {
          std::cout << nbpk::bridge::kRequestTopic << " mode=" << static_cast<int>(r.mode) << " vx=" << r.vx
                    << " vy=" << r.vy << " omega=" << r.omega << '\n';
        }));
      }
      SignalStop signals;
      auto summary = nbpk::recorder::replay(replay_path, bus, opts, signals.token());
      taps.clear();
      if (!summary) {
        spdlog::error("replay: {}", summary.error().detail);
        return kExitRuntime;
      }
      std::cout << "published=" << summary->published << " skipped=" << summary->skipped
                << (summary->truncated ? " truncated" : "") << '\n';
      return kExitOk;
    }
    if (*exporter) return run_export(export_log, export_dir, export_index);
    if (*teleop) {
      auto addr = robot_address(teleop_robot);
      if (!addr) {
        std::cerr << "teleop: " << addr.error() << '\n';
        return kExitUsage;
      }
      teleop_cfg.robot = *addr;
      nbpk::TopicBus bus;
      nbpk::bridge::Bridge br(teleop_cfg, bus);
      if (auto started = br.start(); !started) {
        spdlog::error("teleop: {}", started.error());
        return kExitRuntime;
      }
      std::cout << "w/s: vx  a/d: vy  q/e: omega  space: stand  " << teleop_opts.keys.exit
                << ": exit\r\n";
      nbpk::teleop::TeleopSummary summary;
      {
        nbpk::teleop::RawTerminal raw;
        auto keys = nbpk::teleop::stdin_key_source();
        summary = nbpk::teleop::teleop_loop(bus, keys, teleop_opts, &std::cout);
      }
      // Give the forwarder a moment to flush the final STAND.
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      br.stop();
      std::cout << "sent " << summary.periodic_published << " periodic requests, final STAND\n";
      return kExitOk;
    }
    if (*inertia) return run_inertia(inertia_path, inertia_base);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitUsage;
}

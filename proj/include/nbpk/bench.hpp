#pragma once

// Scenario-driven benchmark: robot -> (impaired channel) -> bridge, compared
// against the independent-loss delivery model.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nbpk/channel.hpp"
#include "nbpk/result.hpp"

namespace nbpk::bench {

struct Scenario {
  double duration_s = 60.0;
  double fps = 30.0;
  std::uint16_t width = 320;
  std::uint16_t height = 240;
  std::uint16_t frag_payload = 1400;
  channel::ImpairmentConfig impairment;
  /// Seeds the impairment PRNG; overrides impairment.seed.
  std::uint64_t seed = 1;
};

Result<Ok, std::string> validate(const Scenario& s);

struct Report {
  std::string mode;
  std::uint64_t seed = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_corrupt = 0;
  std::uint64_t frames_dropped_preempted = 0;
  double delivery_ratio = 0.0;
  double expected_ratio = 0.0;
  std::uint32_t packets_per_frame = 0;
  double latency_mean_us = 0.0;
  double latency_p95_us = 0.0;
  std::uint64_t orphan_fragments = 0;
  std::uint64_t duplicate_fragments = 0;
  std::uint64_t bytes_on_wire = 0;
  double achieved_fps = 0.0;
  /// FNV-1a over the per-packet fates and delivered frame seqs.
  std::string trace_digest;

  friend bool operator==(const Report&, const Report&) = default;
};

/// Probability that a frame of n packets survives independent loss p: (1-p)^n.
double analytic_delivery(double loss_p, std::uint32_t packets_per_frame);

/// START plus ceil(w*h*2 / frag_payload) fragments.
std::uint32_t packets_per_frame(std::uint16_t width, std::uint16_t height,
                                std::uint16_t frag_payload);

struct ScenarioTrace {
  std::vector<channel::Fate> fates;
  std::vector<std::uint32_t> delivered_seqs;
};

/// In-process run on a virtual clock. Deterministic given the scenario.
Report run_scenario(const Scenario& s, ScenarioTrace* trace = nullptr);

struct LoopbackPorts {
  std::uint16_t image = channel::kDefaultImagePort;
  std::uint16_t motion = channel::kDefaultMotionPort;
  std::uint16_t command = channel::kDefaultCommandPort;
};

/// Real-time run of RobotSim and Bridge over UDP loopback. Impairment is not
/// applied; the report carries receive-side counts and rates.
Result<Report, std::string> run_loopback(const Scenario& s, LoopbackPorts ports = {});

std::string to_json(const Report& r);
Result<Report, std::string> report_from_json(const std::string& text);
Result<Ok, std::string> write_report(const Report& r, const std::filesystem::path& path);
Result<Report, std::string> read_report(const std::filesystem::path& path);

}  // namespace nbpk::bench

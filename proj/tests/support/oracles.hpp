#pragma once

// Independent reference models used to check the library. They deliberately
// share no code with src/ beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "nbpk/inertial.hpp"

namespace nbpk::testing {

// ---------------------------------------------------------------------------
// Drop policy, frame level.
//
// A packet trace is described abstractly: frame k has one START and n_k
// fragments, sent in order START, F0..F(n_k-1), frames back to back. Delivery
// keeps order and only removes packets. Under the single-slot, drop-on-next-
// START policy a frame completes exactly when every one of its packets
// arrives; an incomplete frame whose START arrived is reported dropped when a
// later START arrives; every fragment of a frame whose START was lost is an
// orphan.

struct AbstractPacket {
  std::size_t frame;
  bool start;
  std::size_t index;  // fragment index, ignored for START
};

inline std::vector<AbstractPacket> abstract_trace(const std::vector<std::size_t>& frag_counts) {
  std::vector<AbstractPacket> out;
  for (std::size_t f = 0; f < frag_counts.size(); ++f) {
    out.push_back({f, true, 0});
    for (std::size_t i = 0; i < frag_counts[f]; ++i) out.push_back({f, false, i});
  }
  return out;
}

struct DropOutcome {
  std::vector<std::size_t> completed;
  std::vector<std::size_t> dropped;
  std::size_t orphans = 0;

  friend bool operator==(const DropOutcome&, const DropOutcome&) = default;
};

/// `delivered[i]` says whether packet i of abstract_trace(frag_counts) arrives.
inline DropOutcome predict_drop_policy(const std::vector<std::size_t>& frag_counts,
                                       const std::vector<bool>& delivered) {
  const auto trace = abstract_trace(frag_counts);
  const std::size_t frames = frag_counts.size();
  std::vector<bool> start_seen(frames, false);
  std::vector<std::size_t> frags_seen(frames, 0);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (!delivered[i]) continue;
    if (trace[i].start)
      start_seen[trace[i].frame] = true;
    else
      ++frags_seen[trace[i].frame];
  }
  DropOutcome out;
  for (std::size_t f = 0; f < frames; ++f) {
    if (!start_seen[f]) {
      out.orphans += frags_seen[f];
      continue;
    }
    if (frags_seen[f] == frag_counts[f]) {
      out.completed.push_back(f);
      continue;
    }
    bool later_start = false;
    for (std::size_t g = f + 1; g < frames; ++g) later_start = later_start || start_seen[g];
    if (later_start) out.dropped.push_back(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference reassembler: a map-of-sets model of one stream, packet level.

class ReferenceReassembler {
 public:
  enum class Kind { Nothing, Complete, Dropped, Orphan, Duplicate };
  struct Out {
    Kind kind = Kind::Nothing;
    std::uint32_t seq = 0;
    std::vector<std::uint8_t> bytes;
  };

  Out start(std::uint32_t seq, std::size_t total_len, std::size_t frag_payload, std::size_t count) {
    // Only seqs newer than every START seen so far open a frame.
    if (newest_ && static_cast<std::int32_t>(seq - *newest_) <= 0)
      return {seq == *newest_ ? Kind::Duplicate : Kind::Orphan};
    newest_ = seq;
    Out out;
    if (current_) out = {Kind::Dropped, *current_};
    current_ = seq;
    total_ = total_len;
    frag_payload_ = frag_payload;
    count_ = count;
    parts_.clear();
    return out;
  }

  Out fragment(std::uint32_t seq, std::size_t index, const std::vector<std::uint8_t>& payload) {
    if (!current_ || *current_ != seq) return {last_done_ == seq ? Kind::Duplicate : Kind::Orphan};
    const std::size_t offset = index * frag_payload_;
    const std::size_t expect = std::min(frag_payload_, total_ - std::min(total_, offset));
    if (index >= count_ || payload.size() != expect) return {Kind::Orphan};
    if (parts_.count(index)) return {Kind::Duplicate};
    parts_[index] = payload;
    if (parts_.size() < count_) return {};
    Out out{Kind::Complete, seq, {}};
    for (auto& [i, p] : parts_) out.bytes.insert(out.bytes.end(), p.begin(), p.end());
    last_done_ = seq;
    current_.reset();
    parts_.clear();
    return out;
  }

 private:
  std::optional<std::uint32_t> current_;
  std::size_t total_ = 0, frag_payload_ = 0, count_ = 0;
  std::map<std::size_t, std::vector<std::uint8_t>> parts_;
  std::optional<std::uint32_t> newest_;
  std::optional<std::uint32_t> last_done_;
};

// ---------------------------------------------------------------------------
// Point-cloud inertia: solid boxes discretised on a stratified grid of cell
// centres, rotated and translated, then summed point by point.

struct BoxBody {
  double mass;
  inertial::Vec3 size;    // edge lengths along the box axes
  inertial::Mat3 rotation;  // box axes -> common frame
  inertial::Vec3 centre;
};

struct PointMass {
  double m;
  inertial::Vec3 p;
};

inline inertial::Mat3 rotation_zyx(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  inertial::Mat3 r;
  r.a = {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp,     cp * sr,                cp * cr};
  return r;
}

inline void sample_box(const BoxBody& box, int n, std::vector<PointMass>& out) {
  const double dm = box.mass / (static_cast<double>(n) * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double u[3] = {(i + 0.5) / n - 0.5, (j + 0.5) / n - 0.5, (k + 0.5) / n - 0.5};
        const double local[3] = {u[0] * box.size.x, u[1] * box.size.y, u[2] * box.size.z};
        inertial::Vec3 p = box.centre;
        p.x += box.rotation(0, 0) * local[0] + box.rotation(0, 1) * local[1] + box.rotation(0, 2) * local[2];
        p.y += box.rotation(1, 0) * local[0] + box.rotation(1, 1) * local[1] + box.rotation(1, 2) * local[2];
        p.z += box.rotation(2, 0) * local[0] + box.rotation(2, 1) * local[1] + box.rotation(2, 2) * local[2];
        out.push_back({dm, p});
      }
}

struct CloudResult {
  double mass = 0.0;
  inertial::Vec3 com;
  inertial::Mat3 inertia;  // about `com`
};

/// Mass, centre and inertia of a point cloud, summed directly from the points.
inline CloudResult integrate_cloud(const std::vector<PointMass>& points,
                                   std::optional<inertial::Vec3> about = std::nullopt) {
  CloudResult r;
  double sx = 0, sy = 0, sz = 0;
  for (const auto& q : points) {
    r.mass += q.m;
    sx += q.m * q.p.x;
    sy += q.m * q.p.y;
    sz += q.m * q.p.z;
  }
  r.com = {sx / r.mass, sy / r.mass, sz / r.mass};
  const inertial::Vec3 o = about.value_or(r.com);
  for (const auto& q : points) {
    const double x = q.p.x - o.x, y = q.p.y - o.y, z = q.p.z - o.z;
    r.inertia(0, 0) += q.m * (y * y + z * z);
    r.inertia(1, 1) += q.m * (x * x + z * z);
    r.inertia(2, 2) += q.m * (x * x + y * y);
    r.inertia(0, 1) -= q.m * x * y;
    r.inertia(0, 2) -= q.m * x * z;
    r.inertia(1, 2) -= q.m * y * z;
  }
  r.inertia(1, 0) = r.inertia(0, 1);
  r.inertia(2, 0) = r.inertia(0, 2);
  r.inertia(2, 1) = r.inertia(1, 2);
  return r;
}

/// Textbook solid-box inertia about its centre, expressed in the common frame.
inline inertial::RigidBody box_rigid_body(const BoxBody& box) {
  const double a = box.size.x, b = box.size.y, c = box.size.z;
  const auto d = inertial::Mat3::diag(box.mass * (b * b + c * c) / 12.0,
                                      box.mass * (a * a + c * c) / 12.0,
                                      box.mass * (a * a + b * b) / 12.0);
  inertial::RigidBody body;
  body.mass = box.mass;
  body.com = box.centre;
  body.inertia = box.rotation * d * box.rotation.transposed();
  return body;
}

inline double relative_error(const inertial::Mat3& got, const inertial::Mat3& want) {
  return (got - want).frobenius() / want.frobenius();
}

}  // namespace nbpk::testing

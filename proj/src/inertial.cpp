#include "nbpk/inertial.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace nbpk::inertial {

double Mat3::determinant() const {
  const auto& m = *this;
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

std::array<double, 3> principal_moments(const Mat3& raw) {
  const Mat3 m = 0.5 * (raw + raw.transposed());
  const double off = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
  std::array<double, 3> eig{};
  if (off == 0.0) {
    eig = {m(0, 0), m(1, 1), m(2, 2)};
  } else {
    const double q = (m(0, 0) + m(1, 1) + m(2, 2)) / 3.0;
    const double p2 = (m(0, 0) - q) * (m(0, 0) - q) + (m(1, 1) - q) * (m(1, 1) - q) +
                      (m(2, 2) - q) * (m(2, 2) - q) + 2.0 * off;
    const double p = std::sqrt(p2 / 6.0);
    const Mat3 b = (1.0 / p) * (m - q * Mat3::identity());
    const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double largest = q + 2.0 * p * std::cos(phi);
    const double smallest = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    eig = {smallest, 3.0 * q - largest - smallest, largest};
  }
  std::sort(eig.begin(), eig.end());
  return eig;
}

ValidationReport validate_inertia(const Mat3& inertia, double mass) {
  ValidationReport report;
  for (double v : inertia.a) {
    if (!std::isfinite(v)) {
      report.violations.push_back("inertia has a non-finite entry");
      return report;
    }
  }
  if (!std::isfinite(mass) || mass < 0.0) report.violations.push_back("mass must be finite and >= 0");

  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(inertia(i, j) - inertia(j, i)) >= kSymmetryTolerance) {
        std::ostringstream os;
        os << "not symmetric: I(" << i << "," << j << ")=" << inertia(i, j) << " vs I(" << j << ","
           << i << ")=" << inertia(j, i);
        report.violations.push_back(os.str());
      }

  const auto& m = inertia;
  report.leading_minors = {m(0, 0), m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0), m.determinant()};
  report.principal_moments = principal_moments(inertia);

  if (mass > 0.0) {
    for (std::size_t k = 0; k < 3; ++k)
      if (!(report.leading_minors[k] > 0.0)) {
        std::ostringstream os;
        os << "not positive definite: leading minor " << k + 1 << " = " << report.leading_minors[k];
        report.violations.push_back(os.str());
      }
  }

  // Sorted ascending, so the binding inequality is l0 + l1 >= l2. The slack
  // only absorbs floating-point rounding.
  const auto& l = report.principal_moments;
  const double slack = 1e-12 * std::max({std::abs(l[0]), std::abs(l[1]), std::abs(l[2])});
  if (l[0] + l[1] < l[2] - slack) {
    std::ostringstream os;
    os << "triangle inequality violated: " << l[0] << " + " << l[1] << " < " << l[2]
       << " (deficit " << l[2] - l[0] - l[1] << ")";
    report.violations.push_back(os.str());
  }
  return report;
}

Mat3 parallel_axis(const Mat3& inertia_com, double mass, const Vec3& d) {
  return inertia_com + mass * (d.norm_squared() * Mat3::identity() - Mat3::outer(d, d));
}

Result<RigidBody, std::string> compose(std::span<const RigidBody> bodies) {
  if (bodies.empty()) return unexpected(std::string("compose needs at least one body"));
  double mass = 0.0;
  Vec3 weighted;
  for (const auto& b : bodies) {
    mass += b.mass;
    weighted += b.mass * b.com;
  }
  if (!(mass > 0.0)) return unexpected(std::string("total mass is zero; centre of mass undefined"));
  RigidBody out;
  out.mass = mass;
  out.com = weighted / mass;
  for (const auto& b : bodies) out.inertia += parallel_axis(b.inertia, b.mass, b.com - out.com);
  return out;
}

Result<Vec3, std::string> com_shift(const RigidBody& base, const RigidBody& addon) {
  const double total = base.mass + addon.mass;
  if (!(total > 0.0)) return unexpected(std::string("total mass is zero"));
  return (addon.mass / total) * (addon.com - base.com);
}

RigidBody backpack_body() {
  RigidBody b;
  b.mass = 0.2074;
  b.com = {-0.0197, 0.0, 0.052};
  b.inertia.a = {5.66e-4,  3.74e-6,  -2.13e-4,  //
                 3.74e-6,  6.46e-4,  -9.76e-6,  //
                 -2.13e-4, -9.76e-6, 8.17e-5};
  return b;
}

namespace {

RigidBody body_from(const nlohmann::json& j) {
  RigidBody b;
  j.at("mass").get_to(b.mass);
  const auto com = j.at("com").get<std::vector<double>>();
  if (com.size() != 3) throw std::invalid_argument("com needs 3 numbers");
  b.com = {com[0], com[1], com[2]};
  const auto inertia = j.at("inertia").get<std::vector<double>>();
  if (inertia.size() != 9) throw std::invalid_argument("inertia needs 9 numbers (row-major)");
  std::copy(inertia.begin(), inertia.end(), b.inertia.a.begin());
  return b;
}

}  // namespace

Result<std::vector<RigidBody>, std::string> bodies_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<RigidBody> bodies;
    if (j.is_array()) {
      for (const auto& item : j) bodies.push_back(body_from(item));
    } else if (j.is_object() && j.contains("bodies")) {
      for (const auto& item : j.at("bodies")) bodies.push_back(body_from(item));
    } else {
      bodies.push_back(body_from(j));
    }
    if (bodies.empty()) return unexpected(std::string("no bodies in document"));
    return bodies;
  } catch (const std::exception& e) {
    return unexpected(std::string("bad body document: ") + e.what());
  }
}

std::string to_json(const RigidBody& body) {
  nlohmann::json j = {{"mass", body.mass},
                      {"com", {body.com.x, body.com.y, body.com.z}},
                      {"inertia", body.inertia.a}};
  return j.dump();
}

}  // namespace nbpk::inertial

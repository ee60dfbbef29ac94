#pragma once

// Rigid-body mass properties for robot add-ons: tensor validity, parallel-axis
// shifts, multi-body composition and centre-of-mass shift.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nbpk/result.hpp"

namespace nbpk::inertial {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double norm_squared() const { return x * x + y * y + z * z; }
};

/// 3x3 matrix, row-major.
struct Mat3 {
  std::array<double, 9> a{};

  static Mat3 identity() { return diag(1.0, 1.0, 1.0); }
  static Mat3 diag(double d0, double d1, double d2) {
    Mat3 m;
    m(0, 0) = d0;
    m(1, 1) = d1;
    m(2, 2) = d2;
    return m;
  }
  static Mat3 outer(const Vec3& u, const Vec3& v) {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = u[i] * v[j];
    return m;
  }

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(3 * i + j)]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(3 * i + j)]; }

  Mat3& operator+=(const Mat3& o) {
    for (std::size_t k = 0; k < 9; ++k) a[k] += o.a[k];
    return *this;
  }
  friend Mat3 operator+(Mat3 l, const Mat3& r) { return l += r; }
  friend Mat3 operator-(Mat3 l, const Mat3& r) {
    for (std::size_t k = 0; k < 9; ++k) l.a[k] -= r.a[k];
    return l;
  }
  friend Mat3 operator*(double s, Mat3 m) {
    for (auto& v : m.a) v *= s;
    return m;
  }
  friend Mat3 operator*(const Mat3& l, const Mat3& r) {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) m(i, j) += l(i, k) * r(k, j);
    return m;
  }
  Mat3 transposed() const {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = (*this)(j, i);
    return m;
  }
  double frobenius() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }
  double determinant() const;

  friend bool operator==(const Mat3&, const Mat3&) = default;
};

struct RigidBody {
  double mass = 0.0;  // kg
  Vec3 com;           // m, in the common reference frame
  Mat3 inertia;       // kg m^2, about the body's own centre of mass
};

inline constexpr double kSymmetryTolerance = 1e-12;

struct ValidationReport {
  std::vector<std::string> violations;
  std::array<double, 3> leading_minors{};
  std::array<double, 3> principal_moments{};  // ascending

  bool valid() const { return violations.empty(); }
};

/// Eigenvalues of the symmetric part of `m`, ascending, from the characteristic cubic.
std::array<double, 3> principal_moments(const Mat3& m);

/// Checks symmetry, positive definiteness (leading minors, when mass > 0) and
/// the principal-moment triangle inequalities. Reports every violation found.
ValidationReport validate_inertia(const Mat3& inertia, double mass);

/// Inertia about a point at offset d from the CoM: I + m(|d|^2 E - d d^T).
Mat3 parallel_axis(const Mat3& inertia_com, double mass, const Vec3& d);

/// Combined body in the common frame; inertia about the combined CoM.
Result<RigidBody, std::string> compose(std::span<const RigidBody> bodies);

/// Displacement of the combined CoM from the base CoM when `addon` is attached.
Result<Vec3, std::string> com_shift(const RigidBody& base, const RigidBody& addon);

/// The backpack add-on's published mass properties.
RigidBody backpack_body();

/// Parses either one body object or an array of them:
/// {"mass": kg, "com": [x, y, z], "inertia": [9 numbers, row-major]}.
Result<std::vector<RigidBody>, std::string> bodies_from_json(const std::string& text);
std::string to_json(const RigidBody& body);

}  // namespace nbpk::inertial

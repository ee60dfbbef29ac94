#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "nbpk/inertial.hpp"
#include "oracles.hpp"

using namespace nbpk::inertial;
using nbpk::testing::BoxBody;
using nbpk::testing::PointMass;

namespace {

void expect_mat_near(const Mat3& got, const Mat3& want, double tol) {
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(got.a[k], want.a[k], tol) << "entry " << k;
}

void expect_vec_near(const Vec3& got, const Vec3& want, double tol) {
  EXPECT_NEAR(got.x, want.x, tol);
  EXPECT_NEAR(got.y, want.y, tol);
  EXPECT_NEAR(got.z, want.z, tol);
}

BoxBody random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mass(0.05, 3.0), edge(0.02, 0.4), angle(-3.1, 3.1),
      pos(-0.3, 0.3);
  return {mass(rng), {edge(rng), edge(rng), edge(rng)},
          nbpk::testing::rotation_zyx(angle(rng), angle(rng) / 2, angle(rng)),
          {pos(rng), pos(rng), pos(rng)}};
}

Mat3 rotate(const Mat3& r, const Mat3& inertia) { return r * inertia * r.transposed(); }

Vec3 rotate(const Mat3& r, const Vec3& v) {
  return {r(0, 0) * v.x + r(0, 1) * v.y + r(0, 2) * v.z, r(1, 0) * v.x + r(1, 1) * v.y + r(1, 2) * v.z,
          r(2, 0) * v.x + r(2, 1) * v.y + r(2, 2) * v.z};
}

constexpr int kGrid = 40;  // midpoint rule: relative error ~ 1/kGrid^2

}  // namespace

TEST(Validate, ScaledIdentityIsValid) {
  const auto r = validate_inertia(1e-4 * Mat3::identity(), 1.0);
  EXPECT_TRUE(r.valid());
  for (double l : r.principal_moments) EXPECT_NEAR(l, 1e-4, 1e-16);
}

TEST(Validate, TriangleViolation) {
  const auto r = validate_inertia(Mat3::diag(1, 1, 3), 1.0);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("triangle"), std::string::npos);
}

TEST(Validate, TriangleEqualityIsAllowed) {
  // A thin plate: Izz = Ixx + Iyy exactly.
  EXPECT_TRUE(validate_inertia(Mat3::diag(1, 2, 3), 1.0).valid());
}

TEST(Validate, AsymmetryAndIndefinitenessAreReported) {
  auto m = Mat3::identity();
  m(0, 1) = 0.1;
  auto r = validate_inertia(m, 1.0);
  EXPECT_FALSE(r.valid());
  EXPECT_NE(r.violations[0].find("symmetric"), std::string::npos);

  r = validate_inertia(Mat3::diag(-1, 2, 2), 1.0);
  EXPECT_FALSE(r.valid());
  EXPECT_LT(r.leading_minors[0], 0.0);

  m = Mat3::identity();
  m(2, 2) = std::nan("");
  EXPECT_FALSE(validate_inertia(m, 1.0).valid());
}

TEST(Validate, ReportsAllViolationsTogether) {
  auto m = Mat3::diag(1, 1, 3);
  m(0, 2) = 0.01;
  const auto r = validate_inertia(m, 1.0);
  EXPECT_GE(r.violations.size(), 2u);
}

TEST(PrincipalMoments, RotatedDiagonal) {
  const auto r = nbpk::testing::rotation_zyx(0.7, -0.4, 1.9);
  const auto l = principal_moments(rotate(r, Mat3::diag(3, 1, 2)));
  EXPECT_NEAR(l[0], 1, 1e-12);
  EXPECT_NEAR(l[1], 2, 1e-12);
  EXPECT_NEAR(l[2], 3, 1e-12);
}

TEST(PrincipalMoments, RepeatedEigenvalues) {
  const auto l = principal_moments(2.5 * Mat3::identity());
  for (double v : l) EXPECT_NEAR(v, 2.5, 1e-12);
}

TEST(ParallelAxis, PointMassExamples) {
  expect_mat_near(parallel_axis(Mat3{}, 2.0, {1, 0, 0}), Mat3::diag(0, 2, 2), 1e-15);
  expect_mat_near(parallel_axis(Mat3{}, 1.0, {0, 0, 3}), Mat3::diag(9, 9, 0), 1e-15);
  Mat3 want;
  want.a = {1, -1, 0, -1, 1, 0, 0, 0, 2};
  expect_mat_near(parallel_axis(Mat3{}, 1.0, {1, 1, 0}), want, 1e-15);
}

TEST(ParallelAxis, ZeroOffsetIsIdentityAndSignIsIrrelevant) {
  const auto b = backpack_body();
  EXPECT_EQ(parallel_axis(b.inertia, b.mass, {}), b.inertia);
  expect_mat_near(parallel_axis(b.inertia, b.mass, {0.1, -0.2, 0.3}),
                  parallel_axis(b.inertia, b.mass, {-0.1, 0.2, -0.3}), 1e-18);
}

TEST(ParallelAxis, MatchesPointCloudAboutArbitraryPoint) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto box = random_box(rng);
    std::vector<PointMass> cloud;
    nbpk::testing::sample_box(box, kGrid, cloud);
    const Vec3 p{0.5, -0.2, 0.1};
    const auto want = nbpk::testing::integrate_cloud(cloud, p);
    const auto body = nbpk::testing::box_rigid_body(box);
    const auto got = parallel_axis(body.inertia, body.mass, body.com - p);
    EXPECT_LT(nbpk::testing::relative_error(got, want.inertia), 1e-3);
  }
}

TEST(Compose, TwoPointMasses) {
  const std::vector<RigidBody> bodies = {{1.0, {1, 0, 0}, {}}, {1.0, {-1, 0, 0}, {}}};
  auto c = compose(bodies);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->mass, 2.0);
  expect_vec_near(c->com, {0, 0, 0}, 1e-15);
  expect_mat_near(c->inertia, Mat3::diag(0, 2, 2), 1e-15);
}

TEST(Compose, SingleBodyIsUnchanged) {
  const auto b = backpack_body();
  auto c = compose(std::span(&b, 1));
  ASSERT_TRUE(c);
  EXPECT_EQ(c->mass, b.mass);
  expect_vec_near(c->com, b.com, 1e-15);
  expect_mat_near(c->inertia, b.inertia, 1e-18);
}

TEST(Compose, Errors) {
  EXPECT_FALSE(compose({}));
  const std::vector<RigidBody> massless = {{0.0, {1, 0, 0}, {}}, {0.0, {}, {}}};
  EXPECT_FALSE(compose(massless));
}

TEST(Compose, OrderTranslationAndRotationInvariance) {
  std::mt19937_64 rng(11);
  std::vector<RigidBody> bodies;
  for (int i = 0; i < 4; ++i) bodies.push_back(nbpk::testing::box_rigid_body(random_box(rng)));
  const auto base = *compose(bodies);

  auto reversed = bodies;
  std::reverse(reversed.begin(), reversed.end());
  const auto r = *compose(reversed);
  expect_mat_near(r.inertia, base.inertia, 1e-14);
  expect_vec_near(r.com, base.com, 1e-14);

  const Vec3 t{0.3, -1.2, 0.05};
  auto moved = bodies;
  for (auto& b : moved) b.com += t;
  const auto m = *compose(moved);
  expect_mat_near(m.inertia, base.inertia, 1e-13);
  expect_vec_near(m.com, base.com + t, 1e-13);

  const auto rot = nbpk::testing::rotation_zyx(0.4, 1.1, -0.6);
  auto turned = bodies;
  for (auto& b : turned) {
    b.com = rotate(rot, b.com);
    b.inertia = rotate(rot, b.inertia);
  }
  const auto tr = *compose(turned);
  expect_mat_near(tr.inertia, rotate(rot, base.inertia), 1e-13);
  expect_vec_near(tr.com, rotate(rot, base.com), 1e-13);
}

TEST(Compose, ComposedValidBodiesStayValid) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RigidBody> bodies;
    for (int i = 0; i < 3; ++i) bodies.push_back(nbpk::testing::box_rigid_body(random_box(rng)));
    for (const auto& b : bodies) ASSERT_TRUE(validate_inertia(b.inertia, b.mass).valid());
    const auto c = *compose(bodies);
    EXPECT_TRUE(validate_inertia(c.inertia, c.mass).valid());
  }
}

TEST(Compose, MatchesPointCloudOnRandomBodies) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int parts = 2 + trial % 3;
    std::vector<RigidBody> bodies;
    std::vector<PointMass> cloud;
    for (int i = 0; i < parts; ++i) {
      const auto box = random_box(rng);
      bodies.push_back(nbpk::testing::box_rigid_body(box));
      nbpk::testing::sample_box(box, kGrid, cloud);
    }
    const auto want = nbpk::testing::integrate_cloud(cloud);
    const auto got = compose(bodies);
    ASSERT_TRUE(got);
    EXPECT_NEAR(got->mass, want.mass, 1e-9 * want.mass);  // summation rounding over 10^5 points
    expect_vec_near(got->com, want.com, 1e-9);
    EXPECT_LT(nbpk::testing::relative_error(got->inertia, want.inertia), 1e-3) << "trial " << trial;
  }
}

TEST(ComShift, Examples) {
  const RigidBody base{1.0, {0, 0, 0}, Mat3::identity()};
  const RigidBody addon{1.0, {2, 0, 0}, Mat3::identity()};
  expect_vec_near(*com_shift(base, addon), {1, 0, 0}, 1e-15);
  const RigidBody heavy_base{3.0, {0, 0, 1}, Mat3::identity()};
  expect_vec_near(*com_shift(heavy_base, addon), {0.5, 0, -0.25}, 1e-15);
  const RigidBody massless{0.0, {5, 5, 5}, {}};
  expect_vec_near(*com_shift(base, massless), {0, 0, 0}, 0.0);
  EXPECT_FALSE(com_shift(massless, massless));
}

TEST(ComShift, AgreesWithCompose) {
  const RigidBody base{4.5, {0.01, -0.02, 0.3}, Mat3::diag(0.1, 0.1, 0.05)};
  const auto addon = backpack_body();
  const std::vector<RigidBody> both = {base, addon};
  const auto c = *compose(both);
  expect_vec_near(*com_shift(base, addon), c.com - base.com, 1e-15);
}

TEST(Backpack, PublishedTensorIsSymmetricPositiveDefiniteButFailsTriangle) {
  const auto b = backpack_body();
  const auto r = validate_inertia(b.inertia, b.mass);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(b.inertia(i, j), b.inertia(j, i));
  for (double m : r.leading_minors) EXPECT_GT(m, 0.0);
  for (double l : r.principal_moments) EXPECT_GT(l, 0.0);
  // The published moments miss l0 + l1 >= l2 by about two percent; the
  // validator must say so rather than pass it.
  const auto& l = r.principal_moments;
  EXPECT_LT(l[0] + l[1], l[2]);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("triangle"), std::string::npos);
}

TEST(Json, BundledBackpackFileMatchesBuiltin) {
  std::ifstream in(std::string(NBPK_SOURCE_DIR) + "/data/backpack.json");
  ASSERT_TRUE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  auto bodies = bodies_from_json(ss.str());
  ASSERT_TRUE(bodies) << bodies.error();
  ASSERT_EQ(bodies->size(), 1u);
  const auto b = backpack_body();
  EXPECT_EQ((*bodies)[0].mass, b.mass);
  EXPECT_EQ((*bodies)[0].com, b.com);
  EXPECT_EQ((*bodies)[0].inertia, b.inertia);
}

TEST(Json, RoundTripAndErrors) {
  const auto b = backpack_body();
  auto back = bodies_from_json(to_json(b));
  ASSERT_TRUE(back);
  EXPECT_EQ((*back)[0].inertia, b.inertia);
  EXPECT_EQ((*back)[0].com, b.com);
  auto arr = bodies_from_json("[" + to_json(b) + "," + to_json(b) + "]");
  ASSERT_TRUE(arr);
  EXPECT_EQ(arr->size(), 2u);
  EXPECT_FALSE(bodies_from_json("[]"));
  EXPECT_FALSE(bodies_from_json("{\"mass\": 1, \"com\": [0, 0], \"inertia\": [1,0,0,0,1,0,0,0,1]}"));
  EXPECT_FALSE(bodies_from_json("{\"mass\": 1, \"com\": [0, 0, 0], \"inertia\": [1, 2]}"));
  EXPECT_FALSE(bodies_from_json("nope"));
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stitch/pose.hpp"

using namespace stitch;

namespace {

Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  return {Vec3(u(rng), u(rng), u(rng)), random_quat(rng)};
}

}  // namespace

TEST(Compose, IdentityPlusZeroDelta) {
  const Pose p = compose(Pose::identity(), DeltaAction{});
  EXPECT_EQ(p.position, Vec3::Zero());
  EXPECT_NEAR(rotation_error(p.orientation, Quat::Identity()), 0.0, 1e-12);
}

TEST(Compose, TranslationAtOrigin) {
  DeltaAction d;
  d.dpos = Vec3(1, 0, 0);
  const Pose p = compose(Pose::identity(), d);
  EXPECT_NEAR((p.position - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(Compose, LocalFrameTranslation) {
  Pose p;
  p.orientation = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
  DeltaAction d;
  d.dpos = Vec3(1, 0, 0);
  // R_z(90) * e_x = e_y
  EXPECT_NEAR((compose(p, d).position - Vec3(0, 1, 0)).norm(), 0.0, 1e-12);
}

TEST(Compose, RotationIncrementIsLocal) {
  Pose p;
  p.orientation = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX()));
  DeltaAction d;
  d.drot = Vec3(0, 0, 3);
  const Pose q = compose(p, d);
  const Quat expected = p.orientation * Quat(Eigen::AngleAxisd(deg2rad(3.0), Vec3::UnitZ()));
  EXPECT_NEAR(rotation_error(q.orientation, expected), 0.0, 1e-9);
}

TEST(TranslationError, Examples) {
  Pose a, b;
  b.position = Vec3(3, 4, 0);
  EXPECT_DOUBLE_EQ(translation_error(a, b), 5.0);
  EXPECT_EQ(translation_error(b, b), 0.0);
  a.position = Vec3(1, 1, 1);
  b.position = Vec3(2, 2, 2);
  EXPECT_NEAR(translation_error(a, b), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(translation_error(a, b), 1.7320508, 1e-7);
}

TEST(RotationError, Examples) {
  const Quat id = Quat::Identity();
  EXPECT_EQ(rotation_error(id, id), 0.0);
  const Quat z90(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
  EXPECT_NEAR(rotation_error(id, z90), 90.0, 1e-9);
  const Quat neg(-z90.w(), -z90.x(), -z90.y(), -z90.z());
  EXPECT_NEAR(rotation_error(z90, neg), 0.0, 1e-9);
  EXPECT_NEAR(rotation_error(id, neg), 90.0, 1e-9);
}

TEST(RotationError, RangeIsZeroTo180) {
  const Quat id = Quat::Identity();
  const Quat x180(Eigen::AngleAxisd(M_PI, Vec3::UnitX()));
  EXPECT_NEAR(rotation_error(id, x180), 180.0, 1e-9);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double e = rotation_error(random_quat(rng), random_quat(rng));
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 180.0);
  }
}

TEST(Clamp, Examples) {
  const WorkspaceBounds ws;
  Pose inside;
  inside.position = Vec3(1, 2, 3);
  inside.orientation = Quat(Eigen::AngleAxisd(0.3, Vec3::UnitY()));
  EXPECT_EQ(clamp_to_workspace(inside, ws), inside);

  Pose over = inside;
  over.position.x() = ws.max.x() + 5;
  EXPECT_EQ(clamp_to_workspace(over, ws).position.x(), ws.max.x());

  Pose mixed = inside;
  mixed.position = Vec3(ws.max.x() + 1, ws.min.y() - 7, ws.max.z() + 0.5);
  const Pose c = clamp_to_workspace(mixed, ws);
  for (int i = 0; i < 3; ++i) {
    const double oracle = std::min(std::max(mixed.position[i], ws.min[i]), ws.max[i]);
    EXPECT_EQ(c.position[i], oracle);
  }
  EXPECT_EQ(c.orientation.coeffs(), mixed.orientation.coeffs());
}

TEST(PoseProperty, PureTranslationRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng);
    DeltaAction d;
    d.dpos = Vec3(u(rng), u(rng), u(rng));
    const Pose back = compose(compose(p, d), -d);
    EXPECT_LE(translation_error(p, back), 1e-9);
    EXPECT_LE(rotation_error(p, back), 1e-7);
  }
}

TEST(PoseProperty, TriangleInequality) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Quat a = random_quat(rng), b = random_quat(rng), c = random_quat(rng);
    EXPECT_LE(rotation_error(a, c), rotation_error(a, b) + rotation_error(b, c) + 1e-9);
  }
}

TEST(PoseProperty, SymmetryAndDoubleCover) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    EXPECT_EQ(translation_error(a, b), translation_error(b, a));
    EXPECT_NEAR(rotation_error(a, b), rotation_error(b, a), 1e-9);
    const Quat neg(-b.orientation.w(), -b.orientation.x(), -b.orientation.y(), -b.orientation.z());
    EXPECT_NEAR(rotation_error(a.orientation, neg), rotation_error(a.orientation, b.orientation), 1e-9);
  }
}

TEST(PoseProperty, ProducedQuaternionsAreUnit) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Pose p = random_pose(rng);
  for (int i = 0; i < 10000; ++i) {
    DeltaAction d;
    d.dpos = Vec3(u(rng), u(rng), u(rng));
    d.drot = Vec3(u(rng), u(rng), u(rng));
    p = compose(p, d);
    ASSERT_NEAR(p.orientation.norm(), 1.0, 1e-9) << "step " << i;
  }
  const Pose a = random_pose(rng), b = random_pose(rng);
  EXPECT_NEAR((a * b).orientation.norm(), 1.0, 1e-9);
  EXPECT_NEAR(a.inverse().orientation.norm(), 1.0, 1e-9);
  EXPECT_NEAR(rotation_exp(Vec3(10, -20, 30)).norm(), 1.0, 1e-9);
  EXPECT_NEAR(clamp_to_workspace(a, WorkspaceBounds{}).orientation.norm(), 1.0, 1e-9);
}

TEST(PoseProperty, RelativeDeltaInvertsCompose) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    const Pose c = compose(a, relative_delta(a, b));
    EXPECT_LE(translation_error(b, c), 1e-9);
    EXPECT_LE(rotation_error(b, c), 1e-6);
  }
}

TEST(Rpy, RoundTrip) {
  const Vec3 rpy(10, -20, 30);
  EXPECT_NEAR((matrix_to_rpy(rpy_to_matrix(rpy)) - rpy).norm(), 0.0, 1e-9);
}

TEST(Serialization, ArrayOrderIsPositionThenWxyz) {
  Pose p;
  p.position = Vec3(1, 2, 3);
  p.orientation = Quat(0.5, 0.5, 0.5, 0.5);
  const auto a = p.to_array();
  EXPECT_EQ(a, (std::array<double, 7>{1, 2, 3, 0.5, 0.5, 0.5, 0.5}));
  EXPECT_EQ(Pose::from_array(a), p);
}

#pragma once

#include <array>
#include <span>

#include <Eigen/Geometry>

namespace stitch {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid end-effector / object pose. Position in millimeters, orientation as
/// a unit quaternion. Serialized as [px, py, pz, qw, qx, qy, qz].
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  static Pose identity() { return {}; }
  static Pose from_array(std::span<const double> v);
  std::array<double, 7> to_array() const;

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Vec3 transform_point(const Vec3& local) const { return position + orientation * local; }

  Pose operator*(const Pose& rhs) const;
  Pose inverse() const;

  bool operator==(const Pose& o) const {
    return position == o.position && orientation.coeffs() == o.orientation.coeffs();
  }
};

/// Local-frame increment: translation in mm, intrinsic roll/pitch/yaw in
/// degrees, jaw command in [0, 1].
struct DeltaAction {
  Vec3 dpos = Vec3::Zero();
  Vec3 drot = Vec3::Zero();
  double jaw = 1.0;

  DeltaAction operator-() const { return {-dpos, -drot, jaw}; }
};

/// Per-dimension step magnitudes (δx, δy, δz, δroll, δpitch, δyaw, δjaw).
struct StepLimits {
  Vec3 dpos{1.0, 1.0, 1.0};
  Vec3 drot{3.0, 3.0, 3.0};
  double jaw = 1.0;

  bool admits(const DeltaAction& d, double slack = 1e-9) const;
};

struct WorkspaceBounds {
  Vec3 min{-60.0, -60.0, -20.0};
  Vec3 max{60.0, 60.0, 60.0};

  bool valid() const { return (min.array() < max.array()).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 half_extent() const { return 0.5 * (max - min); }
};

double deg2rad(double deg);
double rad2deg(double rad);

/// Rotation built from intrinsic x-y-z (roll, pitch, yaw) angles in degrees.
Mat3 rpy_to_matrix(const Vec3& rpy_deg);
/// Inverse of rpy_to_matrix. Pitch in [-90, 90] degrees.
Vec3 matrix_to_rpy(const Mat3& r);

/// Rotation vector (axis * angle, degrees) and its inverse map.
Vec3 rotation_log(const Quat& q);
Quat rotation_exp(const Vec3& axis_angle_deg);

Quat normalized(const Quat& q);
/// Representative with non-negative scalar part.
Quat canonical(const Quat& q);

Pose compose(const Pose& pose, const DeltaAction& delta);

/// Local-frame delta taking `from` to `to` exactly (no clipping).
DeltaAction relative_delta(const Pose& from, const Pose& to);

double translation_error(const Pose& a, const Pose& b);

/// Geodesic angle of the relative rotation, degrees, in [0, 180].
double rotation_error(const Pose& a, const Pose& b);
double rotation_error(const Quat& a, const Quat& b);

Pose clamp_to_workspace(const Pose& pose, const WorkspaceBounds& bounds);

}  // namespace stitch

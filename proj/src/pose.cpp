#include "stitch/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stitch {

Pose Pose::from_array(std::span<const double> v) {
  Pose p;
  p.position = Vec3(v[0], v[1], v[2]);
  const Quat q(v[3], v[4], v[5], v[6]);
  // Already-unit input is kept bit-exact so text round trips are lossless.
  p.orientation = std::abs(q.squaredNorm() - 1.0) <= 1e-12 ? q : normalized(q);
  return p;
}

std::array<double, 7> Pose::to_array() const {
  const Quat& q = orientation;
  return {position.x(), position.y(), position.z(), q.w(), q.x(), q.y(), q.z()};
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.position = position + orientation * rhs.position;
  out.orientation = normalized(orientation * rhs.orientation);
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.orientation = orientation.conjugate();
  out.position = -(out.orientation * position);
  return out;
}

bool StepLimits::admits(const DeltaAction& d, double slack) const {
  return (d.dpos.cwiseAbs().array() <= dpos.array() + slack).all() &&
         (d.drot.cwiseAbs().array() <= drot.array() + slack).all();
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

Mat3 rpy_to_matrix(const Vec3& rpy_deg) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(deg2rad(rpy_deg.x()), Vec3::UnitX()) *
          AngleAxisd(deg2rad(rpy_deg.y()), Vec3::UnitY()) *
          AngleAxisd(deg2rad(rpy_deg.z()), Vec3::UnitZ()))
      .toRotationMatrix();
}

Vec3 matrix_to_rpy(const Mat3& r) {
  // R = Rx(a) Ry(b) Rz(c):  r02 = sin b, r12 = -sin a cos b, r22 = cos a cos b,
  // r01 = -cos b sin c, r00 = cos b cos c.
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  const double b = std::asin(sb);
  double a = 0.0;
  double c = 0.0;
  if (std::abs(sb) < 1.0 - 1e-12) {
    a = std::atan2(-r(1, 2), r(2, 2));
    c = std::atan2(-r(0, 1), r(0, 0));
  } else {
    // gimbal lock: fold everything into roll
    a = std::atan2(r(2, 1), r(1, 1));
  }
  return Vec3(rad2deg(a), rad2deg(b), rad2deg(c));
}

Vec3 rotation_log(const Quat& q_in) {
  const Quat q = canonical(q_in);
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-15) return 2.0 * rad2deg(1.0) * v;
  const double angle = 2.0 * std::atan2(s, q.w());
  return rad2deg(angle) * v / s;
}

Quat rotation_exp(const Vec3& axis_angle_deg) {
  const double angle = deg2rad(axis_angle_deg.norm());
  if (angle < 1e-15) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(angle, axis_angle_deg.normalized()));
}

Quat normalized(const Quat& q) {
  Quat out = q;
  out.normalize();
  return out;
}

Quat canonical(const Quat& q) {
  if (q.w() < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  return q;
}

Pose compose(const Pose& pose, const DeltaAction& delta) {
  Pose out;
  out.position = pose.position + pose.orientation * delta.dpos;
  out.orientation = normalized(pose.orientation * Quat(rpy_to_matrix(delta.drot)));
  return out;
}

DeltaAction relative_delta(const Pose& from, const Pose& to) {
  DeltaAction d;
  d.dpos = from.orientation.conjugate() * (to.position - from.position);
  // Same orientation gives exactly zero rotation, not product round-off.
  if (from.orientation.coeffs() != to.orientation.coeffs())
    d.drot = matrix_to_rpy((from.orientation.conjugate() * to.orientation).toRotationMatrix());
  return d;
}

double translation_error(const Pose& a, const Pose& b) {
  return (a.position - b.position).norm();
}

double rotation_error(const Quat& a, const Quat& b) {
  // exact zero for identical inputs; the fused product below leaves ~1e-16
  if (a.coeffs() == b.coeffs() || a.coeffs() == -b.coeffs()) return 0.0;
  const Quat rel = a.conjugate() * b;
  const double s = rel.vec().norm();
  return rad2deg(2.0 * std::atan2(s, std::abs(rel.w())));
}

double rotation_error(const Pose& a, const Pose& b) {
  return rotation_error(a.orientation, b.orientation);
}

Pose clamp_to_workspace(const Pose& pose, const WorkspaceBounds& bounds) {
  Pose out = pose;
  out.position = pose.position.cwiseMax(bounds.min).cwiseMin(bounds.max);
  return out;
}

}  // namespace stitch

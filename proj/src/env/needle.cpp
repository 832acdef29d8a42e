#include "stitch/env/needle.hpp"

#include <cmath>
#include <numbers>

namespace stitch::needle {
namespace {

Mat3 rz(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitZ()).toRotationMatrix(); }
Mat3 rx(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitX()).toRotationMatrix(); }

// Needle frame of the inserted configuration at zero progress: needle x maps
// to world -x, needle y to world z, needle z to world y.
Mat3 suture_plane_rotation() {
  Mat3 r;
  r << -1, 0, 0,
        0, 0, 1,
        0, 1, 0;
  return r;
}

Pose make_pose(const Vec3& p, const Mat3& r) {
  Pose out;
  out.position = p;
  out.orientation = normalized(Quat(r));
  return out;
}

}  // namespace

Pose arc_frame(const SceneGeometry& g, double phi_deg) {
  const double phi = deg2rad(phi_deg);
  const Vec3 p = g.needle_radius_mm * Vec3(std::cos(phi), std::sin(phi), 0.0);
  return make_pose(p, rz(phi_deg) * rx(90.0));
}

Pose tip_frame(const SceneGeometry& g) { return arc_frame(g, 0.0); }
Pose tail_frame(const SceneGeometry& g) { return arc_frame(g, 180.0); }

Pose grasp_frame(const SceneGeometry& g) {
  const double phi_deg = 180.0 * (1.0 - g.grasp_fraction_from_tail);
  const double phi = deg2rad(phi_deg);
  const Vec3 p = g.needle_radius_mm * Vec3(std::cos(phi), std::sin(phi), 0.0);
  return make_pose(p, rz(phi_deg) * rx(180.0));
}

Pose handoff_frame(const SceneGeometry& g) {
  const double phi_deg = 180.0 * g.handoff_fraction_from_tip;
  const double phi = deg2rad(phi_deg);
  const Vec3 p = g.needle_radius_mm * Vec3(std::cos(phi), std::sin(phi), 0.0);
  return make_pose(p, rz(phi_deg) * rx(180.0));
}

Pose at_progress(const SceneGeometry& g, double progress_deg) {
  return make_pose(g.suture_center, suture_plane_rotation() * rz(-progress_deg));
}

double progress_of(const SceneGeometry& /*g*/, const Pose& needle, double lo_deg) {
  const Mat3 rel = suture_plane_rotation().transpose() * needle.rotation();
  double beta = rad2deg(std::atan2(-rel(1, 0), rel(0, 0)));
  while (beta < lo_deg) beta += 360.0;
  while (beta >= lo_deg + 360.0) beta -= 360.0;
  return beta;
}

double insert_progress_deg(const SceneGeometry& g) { return 180.0 * (1.0 + g.insert_exit_fraction); }

double pullout_progress_deg(const SceneGeometry& g) { return 360.0 + g.pullout_extra_deg; }

Pose place_goal(const SceneGeometry& g) { return at_progress(g, 0.0) * tip_frame(g); }

Pose insert_goal(const SceneGeometry& g) { return at_progress(g, insert_progress_deg(g)) * tip_frame(g); }

Pose pullout_needle_pose(const SceneGeometry& g) {
  Pose n = at_progress(g, pullout_progress_deg(g));
  n.position.z() += g.pullout_lift_mm;
  return n;
}

Pose pullout_goal(const SceneGeometry& g) { return pullout_needle_pose(g) * tip_frame(g); }

Pose resting(const Vec3& center, double yaw_deg) { return make_pose(center, rz(yaw_deg)); }

std::vector<Vec3> arc_points(const SceneGeometry& g, const Pose& needle, int samples) {
  std::vector<Vec3> pts;
  pts.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    const double phi = std::numbers::pi * i / (samples - 1);
    pts.push_back(needle.transform_point(g.needle_radius_mm * Vec3(std::cos(phi), std::sin(phi), 0.0)));
  }
  return pts;
}

}  // namespace stitch::needle

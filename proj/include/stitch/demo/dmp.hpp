#pragma once

#include <array>
#include <vector>

#include "stitch/demo/trajectory.hpp"

namespace stitch::demo {

struct DMPParams {
  int n_basis = 50;
  double alpha_z = 25.0;
  double beta_z = 6.25;
  double alpha_x = 8.0;
  /// Euler sub-steps per output sample during rollout.
  int substeps = 10;

  void validate() const;
};

/// Discrete DMP for one scalar dimension:
///   tau * dz = alpha_z * (beta_z * (g - y) - z) + f(x),   tau * dy = z,
///   tau * dx = -alpha_x * x,
///   f(x) = sum_i(psi_i(x) * w_i) / sum_i(psi_i(x)) * x * (g - y0).
struct Dmp1D {
  std::vector<double> weights;
  double y0 = 0.0;
  double goal = 0.0;
  /// false when the demonstrated dimension never moved; it then acts as a
  /// plain point attractor.
  bool active = false;
};

struct BasisSet {
  std::vector<double> centers;
  std::vector<double> widths;

  static BasisSet make(const DMPParams& p);
  double forcing(const std::vector<double>& w, double x) const;
};

/// Locally weighted regression of the forcing term on one dimension sampled
/// every `dt` seconds. Throws FormatError when start and goal coincide but the
/// dimension moves, since goal-scaled forcing cannot represent that.
Dmp1D dmp_fit_1d(const std::vector<double>& y, double dt, const DMPParams& p, const BasisSet& basis);

/// Euler integration from y0 toward goal; samples every `dt` for `duration`.
std::vector<double> dmp_rollout_1d(const Dmp1D& d, double y0, double goal, double tau, double duration, double dt,
                                   const DMPParams& p, const BasisSet& basis);

/// Six-dimensional pose DMP: world position plus the rotation vector (deg)
/// relative to the start orientation.
struct DMPModel {
  DMPParams params;
  BasisSet basis;
  std::array<Dmp1D, 6> dims;
  /// Demonstration duration.
  double tau = 1.0;
  Pose demo_start;
  Pose demo_goal;
};

DMPModel dmp_fit(const DemoTrajectory& traj, const DMPParams& p = {});

/// Rollout toward a new start and goal. `tau` <= 0 uses the model's own
/// duration. Output jaw column is 1.
DemoTrajectory dmp_rollout(const DMPModel& model, const Pose& start, const Pose& goal, double duration, double dt,
                           double tau = 0.0);

/// Rotation vector of `rel` (deg), choosing between the two representations
/// of the same rotation the one closest to `near`. Lets relative rotations run
/// past 180 degrees continuously.
Vec3 unwrapped_log(const Quat& rel, const Vec3& near);

}  // namespace stitch::demo

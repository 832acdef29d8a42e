#include "stitch/demo/dmp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stitch/error.hpp"

namespace stitch::demo {

void DMPParams::validate() const {
  if (n_basis < 2) throw ConfigError("dmp.n_basis: must be >= 2");
  if (!(alpha_z > 0.0) || !(alpha_x > 0.0)) throw ConfigError("dmp: gains must be positive");
  if (std::abs(beta_z - alpha_z / 4.0) > 1e-12) throw ConfigError("dmp.beta_z: must equal alpha_z / 4");
  if (substeps < 1) throw ConfigError("dmp.substeps: must be >= 1");
}

BasisSet BasisSet::make(const DMPParams& p) {
  BasisSet b;
  const int n = p.n_basis;
  for (int i = 0; i < n; ++i) b.centers.push_back(std::exp(-p.alpha_x * i / (n - 1.0)));
  for (int i = 0; i + 1 < n; ++i) {
    const double d = b.centers[i + 1] - b.centers[i];
    b.widths.push_back(1.0 / (d * d));
  }
  b.widths.push_back(b.widths.back());
  return b;
}

double BasisSet::forcing(const std::vector<double>& w, double x) const {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double psi = std::exp(-widths[i] * (x - centers[i]) * (x - centers[i]));
    num += psi * w[i];
    den += psi;
  }
  return den > 1e-300 ? num / den * x : 0.0;
}

namespace {

// Central differences, one-sided at the ends.
std::vector<double> derivative(const std::vector<double>& y, double dt) {
  const std::size_t n = y.size();
  std::vector<double> d(n);
  if (n < 2) return d;
  d[0] = (y[1] - y[0]) / dt;
  d[n - 1] = (y[n - 1] - y[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2.0 * dt);
  return d;
}

constexpr double kStationary = 1e-6;

}  // namespace

Dmp1D dmp_fit_1d(const std::vector<double>& y, double dt, const DMPParams& p, const BasisSet& basis) {
  if (y.size() < 2) throw FormatError("dmp_fit: need at least 2 samples");
  Dmp1D d;
  d.y0 = y.front();
  d.goal = y.back();
  d.weights.assign(basis.centers.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*hi - *lo <= kStationary) return d;
  const double scale = d.goal - d.y0;
  if (std::abs(scale) < kStationary)
    throw FormatError("dmp_fit: start and goal coincide (within 1e-6) on a moving dimension");
  d.active = true;

  const double tau = dt * static_cast<double>(y.size() - 1);
  const auto yd = derivative(y, dt);
  const auto ydd = derivative(yd, dt);
  std::vector<double> num(basis.centers.size(), 0.0), den(basis.centers.size(), 0.0);
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double x = std::exp(-p.alpha_x * (dt * t) / tau);
    const double f = tau * tau * ydd[t] - p.alpha_z * (p.beta_z * (d.goal - y[t]) - tau * yd[t]);
    const double s = x * scale;
    for (std::size_t i = 0; i < basis.centers.size(); ++i) {
      const double g = std::exp(-basis.widths[i] * (x - basis.centers[i]) * (x - basis.centers[i]));
      num[i] += s * g * f;
      den[i] += s * s * g;
    }
  }
  for (std::size_t i = 0; i < d.weights.size(); ++i) d.weights[i] = den[i] > 1e-300 ? num[i] / den[i] : 0.0;
  return d;
}

std::vector<double> dmp_rollout_1d(const Dmp1D& d, double y0, double goal, double tau, double duration, double dt,
                                   const DMPParams& p, const BasisSet& basis) {
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  std::vector<double> out;
  out.reserve(n + 1);
  double y = y0, z = 0.0, x = 1.0;
  const double h = dt / p.substeps;
  out.push_back(y);
  for (std::size_t k = 0; k < n; ++k) {
    for (int s = 0; s < p.substeps; ++s) {
      const double f = d.active ? basis.forcing(d.weights, x) * (goal - y0) : 0.0;
      const double dz = (p.alpha_z * (p.beta_z * (goal - y) - z) + f) / tau;
      const double dy = z / tau;
      const double dx = -p.alpha_x * x / tau;
      z += h * dz;
      y += h * dy;
      x += h * dx;
    }
    out.push_back(y);
  }
  return out;
}

Vec3 unwrapped_log(const Quat& rel, const Vec3& near) {
  const Vec3 v = rotation_log(rel);
  Vec3 axis;
  if (v.norm() > 1e-9) {
    axis = v.normalized();
  } else if (near.norm() > 1e-9) {
    axis = near.normalized();
  } else {
    return v;
  }
  Vec3 best = v;
  for (int k : {-1, 1}) {
    const Vec3 c = v + k * 360.0 * axis;
    if ((c - near).norm() < (best - near).norm()) best = c;
  }
  return best;
}

DMPModel dmp_fit(const DemoTrajectory& traj, const DMPParams& p) {
  p.validate();
  traj.validate();
  DMPModel m;
  m.params = p;
  m.basis = BasisSet::make(p);
  m.tau = traj.duration();
  m.demo_start = traj.pose.front();
  m.demo_goal = traj.pose.back();

  std::array<std::vector<double>, 6> series;
  Vec3 prev = Vec3::Zero();
  const Quat q0 = traj.pose.front().orientation;
  for (const Pose& pose : traj.pose) {
    const Vec3 r = unwrapped_log(q0.conjugate() * pose.orientation, prev);
    prev = r;
    for (int i = 0; i < 3; ++i) {
      series[i].push_back(pose.position[i]);
      series[3 + i].push_back(r[i]);
    }
  }
  bool moves = false;
  for (const auto& s : series) {
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    moves = moves || *hi - *lo > kStationary;
  }
  if (!moves) throw FormatError("dmp_fit: degenerate trajectory (no dimension moves more than 1e-6)");
  for (int i = 0; i < 6; ++i) {
    try {
      m.dims[i] = dmp_fit_1d(series[i], traj.dt(), p, m.basis);
    } catch (const FormatError& e) {
      static const char* names[6] = {"x", "y", "z", "rx", "ry", "rz"};
      throw FormatError(std::string(e.what()) + " (dimension " + names[i] + ")");
    }
  }
  return m;
}

DemoTrajectory dmp_rollout(const DMPModel& model, const Pose& start, const Pose& goal, double duration, double dt,
                           double tau) {
  if (!(dt > 0.0) || duration < dt) throw ConfigError("dmp_rollout: need duration >= dt > 0");
  const double t = tau > 0.0 ? tau : model.tau;
  // Pick the goal representation nearest the demonstrated one so a long arc
  // keeps its sense of rotation.
  Vec3 demo_ref = Vec3::Zero();
  for (int i = 0; i < 3; ++i) demo_ref[i] = model.dims[3 + i].goal;
  const Vec3 rot_goal = unwrapped_log(start.orientation.conjugate() * goal.orientation, demo_ref);

  std::array<std::vector<double>, 6> ys;
  for (int i = 0; i < 3; ++i) {
    ys[i] = dmp_rollout_1d(model.dims[i], start.position[i], goal.position[i], t, duration, dt, model.params,
                           model.basis);
    ys[3 + i] = dmp_rollout_1d(model.dims[3 + i], 0.0, rot_goal[i], t, duration, dt, model.params, model.basis);
  }
  DemoTrajectory out;
  for (std::size_t k = 0; k < ys[0].size(); ++k) {
    Pose p;
    p.position = Vec3(ys[0][k], ys[1][k], ys[2][k]);
    p.orientation = normalized(start.orientation * rotation_exp(Vec3(ys[3][k], ys[4][k], ys[5][k])));
    out.push_back(static_cast<double>(k) * dt, p, 1.0);
  }
  out.pose.front() = start;
  return out;
}

}  // namespace stitch::demo

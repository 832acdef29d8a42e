#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "stitch/agents/replay.hpp"
#include "stitch/pose.hpp"

namespace stitch::demo {

/// Uniformly sampled pose trajectory of one controlled frame, with jaw state
/// and optional stage labels (0-4).
struct DemoTrajectory {
  std::vector<double> t;
  std::vector<Pose> pose;
  std::vector<double> jaw;
  /// Empty, or one label per sample.
  std::vector<int> label;
  agents::DemoSource source = agents::DemoSource::Heuristic;

  std::size_t size() const { return t.size(); }
  bool labeled() const { return !label.empty(); }
  double dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
  double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }

  void push_back(double time, const Pose& p, double jaw_value, int stage = -1);
  /// Throws FormatError on non-uniform or non-increasing timestamps, ragged
  /// columns or fewer than two samples.
  void validate() const;
};

/// Uniform timestamps starting at 0 with spacing `dt`.
DemoTrajectory make_uniform(const std::vector<Pose>& poses, double dt, double jaw = 1.0);

// Columnar text: a "# stitch-trajectory v1 source=<tag>" line, then one line
// per sample with t, px, py, pz, qw, qx, qy, qz, jaw, label (-1 when absent).
void write_trajectory(std::ostream& out, const DemoTrajectory& traj);
DemoTrajectory read_trajectory(std::istream& in);
void save_trajectory(const DemoTrajectory& traj, const std::filesystem::path& path);
DemoTrajectory load_trajectory(const std::filesystem::path& path);

/// Drops samples whose forward-difference linear speed (mm/s) and angular
/// speed (deg/s) are both below the limits, then re-stamps uniformly.
DemoTrajectory velocity_filter(const DemoTrajectory& traj, double v_lin_min = 0.2, double v_ang_min = 0.1);

struct Segments {
  std::array<DemoTrajectory, 5> stage;
  /// false where the stage never appears.
  std::array<bool, 5> present{};
};

/// Splits a labeled trajectory into contiguous per-stage runs. Labels must be
/// non-decreasing; throws FormatError otherwise.
Segments segment(const DemoTrajectory& traj);

}  // namespace stitch::demo

#include "stitch/demo/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "stitch/error.hpp"

namespace stitch::demo {

void DemoTrajectory::push_back(double time, const Pose& p, double jaw_value, int stage) {
  t.push_back(time);
  pose.push_back(p);
  jaw.push_back(jaw_value);
  if (stage >= 0) label.push_back(stage);
}

void DemoTrajectory::validate() const {
  if (t.size() < 2) throw FormatError("trajectory needs at least 2 samples, has " + std::to_string(t.size()));
  if (pose.size() != t.size() || jaw.size() != t.size() || (!label.empty() && label.size() != t.size()))
    throw FormatError("trajectory columns have different lengths");
  const double h = t[1] - t[0];
  if (!(h > 0.0)) throw FormatError("trajectory timestamps must be strictly increasing");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - h) > 1e-9)
      throw FormatError("trajectory timestamps not uniform at sample " + std::to_string(i));
  }
}

DemoTrajectory make_uniform(const std::vector<Pose>& poses, double dt, double jaw) {
  DemoTrajectory out;
  for (std::size_t i = 0; i < poses.size(); ++i) out.push_back(static_cast<double>(i) * dt, poses[i], jaw);
  return out;
}

void write_trajectory(std::ostream& out, const DemoTrajectory& traj) {
  out << "# stitch-trajectory v1 source=" << agents::to_string(traj.source) << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out << traj.t[i];
    for (double v : traj.pose[i].to_array()) out << ' ' << v;
    out << ' ' << traj.jaw[i] << ' ' << (traj.labeled() ? traj.label[i] : -1) << '\n';
  }
}

DemoTrajectory read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# stitch-trajectory ", 0) != 0)
    throw FormatError("trajectory: missing '# stitch-trajectory' header");
  std::istringstream header(line.substr(20));
  std::string version, source;
  header >> version >> source;
  if (version != "v1") throw FormatError("trajectory: unsupported version '" + version + "'");
  if (source.rfind("source=", 0) != 0) throw FormatError("trajectory: header lacks source=");
  DemoTrajectory traj;
  traj.source = agents::demo_source_from_string(source.substr(7));

  bool any_label = false, any_unlabeled = false;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::array<double, 7> p{};
    double time = 0, jaw = 0;
    int label = -1;
    row >> time;
    for (double& v : p) row >> v;
    row >> jaw >> label;
    if (row.fail()) throw FormatError("trajectory: malformed sample on line " + std::to_string(lineno));
    std::string rest;
    if (row >> rest) throw FormatError("trajectory: extra columns on line " + std::to_string(lineno));
    (label >= 0 ? any_label : any_unlabeled) = true;
    traj.push_back(time, Pose::from_array(p), jaw, label);
  }
  if (any_label && any_unlabeled) throw FormatError("trajectory: labels must be given for all samples or none");
  traj.validate();
  return traj;
}

void save_trajectory(const DemoTrajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_trajectory(out, traj);
}

DemoTrajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return read_trajectory(in);
}

namespace {

// One pass; speeds use the backward difference (forward for sample 0).
DemoTrajectory filter_once(const DemoTrajectory& traj, double v_lin_min, double v_ang_min) {
  const double h = traj.dt();
  DemoTrajectory out;
  out.source = traj.source;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i == 0 ? 1 : i;
    const double v_lin = translation_error(traj.pose[a], traj.pose[b]) / h;
    const double v_ang = rotation_error(traj.pose[a], traj.pose[b]) / h;
    if (v_lin < v_lin_min && v_ang < v_ang_min) continue;
    out.push_back(traj.t.front() + static_cast<double>(out.size()) * h, traj.pose[i], traj.jaw[i],
                  traj.labeled() ? traj.label[i] : -1);
  }
  return out;
}

}  // namespace

DemoTrajectory velocity_filter(const DemoTrajectory& traj, double v_lin_min, double v_ang_min) {
  traj.validate();
  // Iterate to a fixed point: removing samples changes the neighbours of the
  // survivors, and the fixed point makes the filter idempotent.
  DemoTrajectory cur = traj;
  for (;;) {
    DemoTrajectory next = filter_once(cur, v_lin_min, v_ang_min);
    if (next.size() < 2)
      throw FormatError("velocity filter leaves " + std::to_string(next.size()) + " samples (need 2)");
    if (next.size() == cur.size()) return next;
    cur = std::move(next);
  }
}

Segments segment(const DemoTrajectory& traj) {
  if (!traj.labeled()) throw FormatError("segment: trajectory has no stage labels");
  Segments out;
  const double h = traj.dt();
  int prev = -1;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const int l = traj.label[i];
    if (l < 0 || l > 4) throw FormatError("segment: label " + std::to_string(l) + " outside 0-4 at sample " +
                                          std::to_string(i));
    if (l < prev)
      throw FormatError("segment: non-monotone labels (" + std::to_string(prev) + " then " + std::to_string(l) +
                        ") at sample " + std::to_string(i));
    prev = l;
    DemoTrajectory& s = out.stage[l];
    s.source = traj.source;
    s.push_back(static_cast<double>(s.size()) * h, traj.pose[i], traj.jaw[i], l);
    out.present[l] = true;
  }
  return out;
}

}  // namespace stitch::demo

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stitch/agents/replay.hpp"
#include "stitch/demo/dmp.hpp"
#include "stitch/env/suture_env.hpp"

namespace stitch::demo {

/// Scripted-expert run on a chained scene, one sample per state.
struct ExpertRecording {
  /// Driven end effector, jaw and stage label per sample.
  DemoTrajectory ee;
  /// Motion phase within the stage (see ScriptedExpert::phase).
  std::vector<int> phase;
  std::vector<Pose> needle;
};

/// Runs the scripted expert from reset(seed) until the chain terminates.
/// Throws VerificationError if it does not.
ExpertRecording record_expert(const EnvSpec& chain_spec, std::uint64_t seed);

/// Pose series a primitive is fitted in: the driven end effector, or the
/// needle itself for motions that must follow the suture arc.
enum class Frame { EndEffector, Needle };

struct Primitive {
  Subtask stage = Subtask::Grasp;
  int phase = 0;
  Frame frame = Frame::EndEffector;
  /// Empty when the recorded segment could not be fitted; rollouts then use
  /// a minimum-jerk profile.
  std::optional<DMPModel> model;
  /// Recorded duration in seconds.
  double duration = 0.0;
};

struct GeneratorConfig {
  DMPParams dmp;
  /// Seed of the reference expert recording.
  std::uint64_t reference_seed = 0;
  /// Fresh resets tried per requested episode before giving up.
  int max_attempts = 5;
  /// Planned per-step motion stays below this fraction of the step limits.
  double speed_margin = 0.9;
  int workers = 1;
};

class DMPLibrary {
 public:
  /// Velocity-filters and segments the recording, then fits one primitive
  /// per (stage, phase).
  static DMPLibrary fit(const ExpertRecording& rec, const std::array<ScenarioConfig, kNumSubtasks>& stages,
                        const DMPParams& params);

  const Primitive& find(Subtask stage, int phase) const;
  const std::vector<Primitive>& primitives() const { return prims_; }

 private:
  std::vector<Primitive> prims_;
};

/// Minimum-jerk interpolation in position and along the rotation geodesic.
DemoTrajectory min_jerk(const Pose& start, const Pose& goal, double duration, double dt);

/// Inverse-action recovery and environment replay. Sample 0 is taken as the
/// current pose of the driven arm; each later sample becomes one action from
/// the arm's actual pose to that sample, with the jaw from the trajectory.
/// Stops at termination or truncation. Throws VerificationError naming the
/// sample when a step needs more than the step limits (1e-6 tolerance).
std::vector<agents::Transition> traj_to_transitions(const DemoTrajectory& traj, SutureEnv& env);

/// Plans one (stage, phase) motion from the current state with the library.
/// The returned trajectory is in end-effector poses of the driven arm.
DemoTrajectory plan_motion(const SutureEnv& env, const DMPLibrary& lib, double speed_margin = 0.9);

/// Drives a freshly reset environment with library plans until it
/// terminates or truncates. Returns the transitions of the episode and adds
/// the applied translation to `length_mm` when given.
std::vector<agents::Transition> generate_episode(SutureEnv& env, const DMPLibrary& lib, double speed_margin = 0.9,
                                                 double* length_mm = nullptr);

struct TransitionFile {
  static constexpr int kVersion = 1;

  EnvSpec spec;
  agents::DemoDataset data;
  /// Per-stage thresholds as written in the header.
  std::vector<std::pair<double, double>> thresholds;
  std::uint64_t fingerprint = 0;
  /// Applied translation per episode; filled by generation, not stored.
  std::vector<double> length_mm;

  /// Throws VerificationError if the header does not match `expected`.
  void check(const EnvSpec& expected) const;
};

/// Builds `n` verified episodes. Episode i draws resets from seeds derived
/// from (seed, i, attempt); failed replays are retried with the next attempt
/// and a VerificationError is thrown once `max_attempts` is exhausted.
TransitionFile generate_demo_set(const EnvSpec& spec, int n, std::uint64_t seed, const GeneratorConfig& cfg = {});

/// Line-delimited JSON: one header record, then one transition per line.
void write_transitions(std::ostream& out, const TransitionFile& file);
TransitionFile read_transitions(std::istream& in);
void save_transitions(const TransitionFile& file, const std::filesystem::path& path);
TransitionFile load_transitions(const std::filesystem::path& path);

}  // namespace stitch::demo

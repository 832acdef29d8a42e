#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <utility>

#include "stitch/env/scenario.hpp"

namespace stitch {

inline constexpr int kObsDim = 29;
inline constexpr int kGoalDim = 7;
inline constexpr int kActionDim = 7;

using Goal = std::array<double, kGoalDim>;
using Action = std::array<double, kActionDim>;
using ObsVector = std::array<double, kObsDim>;

enum class Holder : int { None = -1, Arm0 = 0, Arm1 = 1 };

struct ArmState {
  Pose ee;
  double jaw = 1.0;  // 0 closed, 1 open
  bool jaw_closed() const { return jaw < 0.5; }
};

struct EnvState {
  std::array<ArmState, 2> arms;
  Pose needle;
  Holder held_by = Holder::None;
  /// Needle pose in the holding arm's end-effector frame; constant while held.
  Pose needle_in_holder;
  bool entered = false;
  bool exited = false;
  bool extracted = false;
  int step_count = 0;
  /// Latched stage completions, in canonical order.
  std::array<bool, kNumSubtasks> completed{};
  std::mt19937_64 rng;
};

/// [ee_pose(7), needle_pose(7), entry_pose(7), exit_pose(7), jaw(1)] for the
/// arm driving the current stage, plus achieved / desired goal poses.
struct Observation {
  ObsVector vector{};
  Goal achieved_goal{};
  Goal desired_goal{};
};

struct StepInfo {
  bool is_success = false;
  double d_trans = 0.0;
  double d_angle = 0.0;
  /// World-frame translation actually applied to the driven end effector (post clamp).
  double applied_translation_mm = 0.0;
  Subtask stage = Subtask::Grasp;
  int stages_completed = 0;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

/// Arm driven during a subtask: arm 0 for grasp/place/insert, arm 1 afterwards.
int active_arm(Subtask s);

/// Jaw reference point; retracts along the tool axis while the jaw is open.
Pose jaw_point(const ArmState& arm, const SceneGeometry& g);

Pose tip_pose(const EnvState& s, const SceneGeometry& g);
Pose stage_desired_goal(const EnvState& s, const ScenarioConfig& stage_cfg);
Pose stage_achieved_goal(const EnvState& s, const ScenarioConfig& stage_cfg);

bool contact_detect(const EnvState& s, const ScenarioConfig& stage_cfg);
/// Live success predicate of `stage_cfg.subtask` on `s`.
bool success(const EnvState& s, const ScenarioConfig& stage_cfg);
/// Latched completion or live success.
bool stage_terminated(const EnvState& s, const ScenarioConfig& stage_cfg);

bool goal_reached(const Goal& achieved, const Goal& desired, double trans_mm, double angle_deg);
double compute_reward(const Goal& achieved, const Goal& desired, RewardMode mode, double trans_mm,
                      double angle_deg);

Action clip_action(std::span<const double> action);
DeltaAction action_to_delta(const Action& a, const StepLimits& limits);
/// Normalizes a delta by the step limits and clips to [-1, 1]; jaw maps 0/1 to -1/+1.
Action delta_to_action(const DeltaAction& d, const StepLimits& limits);

Goal to_goal(const Pose& p);
Pose from_goal(const Goal& g);

class SutureEnv {
 public:
  /// Single-subtask environment.
  explicit SutureEnv(ScenarioConfig cfg);

  /// Chained scene from Grasp through `end_stage`, one config per stage.
  static SutureEnv chain(const std::array<ScenarioConfig, kNumSubtasks>& stages, Subtask end_stage);

  Observation reset(std::uint64_t seed);
  StepResult step(std::span<const double> action);
  Observation observe() const;

  const EnvState& state() const { return state_; }
  void set_state(EnvState s) { state_ = std::move(s); }

  bool is_chain() const { return chain_; }
  Subtask first_stage() const { return first_; }
  Subtask last_stage() const { return last_; }
  /// First stage in [first, last] not yet completed; `last` when all are done.
  Subtask current_stage() const;
  const ScenarioConfig& stage_config(Subtask s) const { return stages_[static_cast<int>(s)]; }
  /// Config of the goal-defining (last) stage.
  const ScenarioConfig& config() const { return stage_config(last_); }
  int max_episode_steps() const { return max_steps_; }

  bool stage_terminated(Subtask s) const;

  /// Stateless reward on goal pairs, shared by stepping and hindsight relabeling.
  double goal_reward(const Goal& achieved, const Goal& desired) const;
  bool goal_success(const Goal& achieved, const Goal& desired) const;
  /// Bounds on discounted returns when rewards are sparse; empty otherwise.
  std::optional<std::pair<double, double>> value_bounds(double gamma) const;

 private:
  SutureEnv() = default;
  void reset_stage(Subtask s);
  void update_completions(int& newly_completed);

  std::array<ScenarioConfig, kNumSubtasks> stages_;
  Subtask first_ = Subtask::Grasp;
  Subtask last_ = Subtask::Grasp;
  bool chain_ = false;
  int max_steps_ = 200;
  EnvState state_;
};

/// Recipe for building environments: one subtask, or a chain from Grasp to
/// `last`. Workers each build their own instance from a shared spec.
struct EnvSpec {
  std::array<ScenarioConfig, kNumSubtasks> stages;
  Subtask last = Subtask::Grasp;
  bool chain = false;

  static EnvSpec single(const ScenarioConfig& cfg);
  static EnvSpec chained(const std::array<ScenarioConfig, kNumSubtasks>& stages, Subtask end_stage);
  /// Chain over the per-subtask defaults.
  static EnvSpec chained(Subtask end_stage);

  SutureEnv make() const;
  const ScenarioConfig& goal_config() const { return stages[static_cast<int>(last)]; }
  /// Combines the fingerprints of every stage the environment uses.
  std::uint64_t fingerprint() const;
};

/// One JSON record per step: step, obs, achieved/desired goal, action, reward, flags.
void write_trace_record(std::ostream& out, int step, const Observation& obs, const Action& action,
                        const StepResult& result);

}  // namespace stitch

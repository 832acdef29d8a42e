#pragma once

#include "stitch/env/suture_env.hpp"

namespace stitch {

/// Straight-line servo from `current` toward `target`. Translation and
/// rotation are each scaled uniformly so that no component exceeds its step
/// limit, which keeps the path straight in position and in rotation.
Action servo_action(const Pose& current, const Pose& target, const StepLimits& limits, bool jaw_open);

/// Scripted controller with privileged state access. Drives whichever stage
/// is current: servo to the grasp frame and close (grasp, handoff), carry the
/// tip to its goal (place), follow the suture arc through both holes (insert,
/// pullout).
class ScriptedExpert {
 public:
  /// Alignment tolerances before the jaw closes or the arc motion starts.
  double close_trans_mm = 0.2;
  double close_angle_deg = 1.0;
  /// Arc waypoint spacing.
  double arc_step_deg = 4.0;
  /// Arc position short of the entry hole where insertion starts.
  double pre_entry_deg = 12.0;

  Action act(const SutureEnv& env) const;
  /// Motion phase within the current stage: insert 0 = line up above the
  /// entry, 1 = follow the arc; pullout 0 = arc, 1 = lift. Always 0 elsewhere.
  int phase(const SutureEnv& env) const;
  /// Target pose of the driven end effector for the current stage.
  Pose target_pose(const SutureEnv& env) const;
};

}  // namespace stitch

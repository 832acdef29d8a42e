#include "stitch/env/expert.hpp"

#include <algorithm>

#include "stitch/env/needle.hpp"

namespace stitch {

Action servo_action(const Pose& current, const Pose& target, const StepLimits& limits, bool jaw_open) {
  const Vec3 dpos = current.orientation.conjugate() * (target.position - current.position);
  // rpy increments are derived from the scaled rotation-vector step so the
  // composed rotation follows the geodesic.
  const Quat rel = current.orientation.conjugate() * target.orientation;
  const Vec3 rotvec = rotation_log(rel);

  const double pos_ratio = dpos.cwiseAbs().cwiseQuotient(limits.dpos).maxCoeff();
  const double rot_ratio = rotvec.cwiseAbs().cwiseQuotient(limits.drot).maxCoeff();

  DeltaAction d;
  d.dpos = pos_ratio > 1.0 ? Vec3(dpos / pos_ratio) : dpos;
  const Vec3 step_rot = rot_ratio > 1.0 ? Vec3(rotvec / rot_ratio) : rotvec;
  d.drot = matrix_to_rpy(rotation_exp(step_rot).toRotationMatrix());
  d.jaw = jaw_open ? 1.0 : 0.0;
  return delta_to_action(d, limits);
}

Pose ScriptedExpert::target_pose(const SutureEnv& env) const {
  const EnvState& s = env.state();
  const Subtask stage = env.current_stage();
  const ScenarioConfig& c = env.stage_config(stage);
  const SceneGeometry& g = c.scene;
  const Pose holder_from_needle = s.needle_in_holder.inverse();

  auto ee_for_needle = [&](const Pose& needle_pose) { return needle_pose * holder_from_needle; };
  auto ee_for_tip = [&](const Pose& tip) { return tip * needle::tip_frame(g).inverse() * holder_from_needle; };

  switch (stage) {
    case Subtask::Grasp: return s.needle * needle::grasp_frame(g);
    case Subtask::Handoff: return s.needle * needle::handoff_frame(g);
    case Subtask::Place: return ee_for_tip(needle::place_goal(g));
    case Subtask::Insert: {
      // Line up on the arc just above the entry hole, then follow the arc.
      if (phase(env) == 0) return ee_for_needle(needle::at_progress(g, -pre_entry_deg));
      const double beta = needle::progress_of(g, s.needle, -90.0);
      return ee_for_needle(needle::at_progress(g, std::min(beta + arc_step_deg, needle::insert_progress_deg(g))));
    }
    case Subtask::Pullout: {
      if (phase(env) == 1) return ee_for_needle(needle::pullout_needle_pose(g));
      const double beta = needle::progress_of(g, s.needle, 180.0);
      return ee_for_needle(needle::at_progress(g, std::min(beta + arc_step_deg, needle::pullout_progress_deg(g))));
    }
  }
  return s.arms[0].ee;
}

int ScriptedExpert::phase(const SutureEnv& env) const {
  const EnvState& s = env.state();
  const SceneGeometry& g = env.stage_config(env.current_stage()).scene;
  switch (env.current_stage()) {
    case Subtask::Insert: {
      if (s.entered) return 1;
      const double beta = needle::progress_of(g, s.needle, -90.0);
      const Pose on_arc = needle::at_progress(g, beta);
      const bool tracking = beta >= -pre_entry_deg - 1.0 && translation_error(s.needle, on_arc) <= close_trans_mm &&
                            rotation_error(s.needle, on_arc) <= close_angle_deg;
      return tracking ? 1 : 0;
    }
    case Subtask::Pullout:
      return needle::progress_of(g, s.needle, 180.0) < needle::pullout_progress_deg(g) - 0.5 ? 0 : 1;
    default: return 0;
  }
}

Action ScriptedExpert::act(const SutureEnv& env) const {
  const EnvState& s = env.state();
  const Subtask stage = env.current_stage();
  const ScenarioConfig& c = env.stage_config(stage);
  const ArmState& arm = s.arms[active_arm(stage)];
  const Pose target = target_pose(env);

  bool jaw_open = false;
  if (stage == Subtask::Grasp || stage == Subtask::Handoff) {
    const bool aligned = translation_error(arm.ee, target) <= close_trans_mm &&
                         rotation_error(arm.ee, target) <= close_angle_deg;
    jaw_open = !aligned;
  }
  // Close on the final approach step so the jaw shuts at the aligned pose.
  if (jaw_open) {
    Action a = servo_action(arm.ee, target, c.step_limits, true);
    const Pose next = compose(arm.ee, action_to_delta(a, c.step_limits));
    if (translation_error(next, target) <= close_trans_mm && rotation_error(next, target) <= close_angle_deg)
      a[6] = -1.0;
    return a;
  }
  return servo_action(arm.ee, target, c.step_limits, false);
}

}  // namespace stitch

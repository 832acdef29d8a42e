#include "stitch/env/suture_env.hpp"

#include <algorithm>
#include <cmath>

#include "stitch/env/needle.hpp"
#include "stitch/error.hpp"
#include "stitch/json_util.hpp"

namespace stitch {

namespace {

std::array<ScenarioConfig, kNumSubtasks> default_stages() {
  std::array<ScenarioConfig, kNumSubtasks> out;
  for (Subtask s : kAllSubtasks) out[static_cast<int>(s)] = default_config(s);
  return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

// Rigid perturbation: translation uniform in a ball, rotation about a random
// axis by an angle uniform in [0, max_deg].
Pose random_jitter(std::mt19937_64& rng, double max_mm, double max_deg) {
  Pose j;
  if (max_mm > 0.0) j.position = unit_vector(rng) * max_mm * std::cbrt(uniform(rng, 0.0, 1.0));
  if (max_deg > 0.0) j.orientation = rotation_exp(unit_vector(rng) * uniform(rng, 0.0, max_deg));
  return j;
}

Pose designated_grasp(const EnvState& s, const SceneGeometry& g, int arm) {
  return s.needle * (arm == 0 ? needle::grasp_frame(g) : needle::handoff_frame(g));
}

bool pose_within(const Pose& a, const Pose& b, double trans_mm, double angle_deg) {
  return translation_error(a, b) <= trans_mm && rotation_error(a, b) <= angle_deg;
}

// Segment a->b crosses the tissue plane in the given direction within
// `radius` of `hole`.
bool crosses_hole(const Vec3& a, const Vec3& b, double surface_z, const Vec3& hole, double radius, bool downward) {
  const double za = a.z() - surface_z;
  const double zb = b.z() - surface_z;
  const bool crossed = downward ? (za > 0.0 && zb <= 0.0) : (za < 0.0 && zb >= 0.0);
  if (!crossed) return false;
  const double t = za / (za - zb);
  const Vec3 p = a + t * (b - a);
  return (p - hole).head<2>().norm() <= radius;
}

void append_canonical(ObsVector& v, int& k, const Pose& p) {
  const auto a = Pose{p.position, canonical(p.orientation)}.to_array();
  for (double x : a) v[k++] = x;
}

}  // namespace

int active_arm(Subtask s) { return (s == Subtask::Handoff || s == Subtask::Pullout) ? 1 : 0; }

Pose jaw_point(const ArmState& arm, const SceneGeometry& g) {
  if (arm.jaw_closed()) return arm.ee;
  Pose p = arm.ee;
  p.position -= arm.ee.orientation * Vec3(0.0, 0.0, g.jaw_open_offset_mm);
  return p;
}

Pose tip_pose(const EnvState& s, const SceneGeometry& g) { return s.needle * needle::tip_frame(g); }

Pose stage_desired_goal(const EnvState& s, const ScenarioConfig& c) {
  switch (c.subtask) {
    case Subtask::Grasp: return designated_grasp(s, c.scene, 0);
    case Subtask::Place: return needle::place_goal(c.scene);
    case Subtask::Insert: return needle::insert_goal(c.scene);
    case Subtask::Handoff: return designated_grasp(s, c.scene, 1);
    case Subtask::Pullout: return needle::pullout_goal(c.scene);
  }
  return {};
}

Pose stage_achieved_goal(const EnvState& s, const ScenarioConfig& c) {
  switch (c.subtask) {
    case Subtask::Grasp: return jaw_point(s.arms[0], c.scene);
    case Subtask::Handoff: return jaw_point(s.arms[1], c.scene);
    default: return tip_pose(s, c.scene);
  }
}

bool contact_detect(const EnvState& s, const ScenarioConfig& c) {
  const int arm = active_arm(c.subtask);
  const ArmState& a = s.arms[arm];
  if (!a.jaw_closed()) return false;
  return (a.ee.position - designated_grasp(s, c.scene, arm).position).norm() <= c.scene.capture_radius_mm;
}

bool success(const EnvState& s, const ScenarioConfig& c) {
  const bool pose_ok = pose_within(stage_achieved_goal(s, c), stage_desired_goal(s, c), c.success_trans_mm,
                                   c.success_angle_deg);
  if (!pose_ok) return false;
  switch (c.subtask) {
    case Subtask::Grasp:
    case Subtask::Handoff: return contact_detect(s, c);
    case Subtask::Place: return true;
    case Subtask::Insert: return s.entered && s.exited;
    case Subtask::Pullout: return s.entered && s.exited && s.extracted;
  }
  return false;
}

bool stage_terminated(const EnvState& s, const ScenarioConfig& c) {
  return s.completed[static_cast<int>(c.subtask)] || success(s, c);
}

bool goal_reached(const Goal& achieved, const Goal& desired, double trans_mm, double angle_deg) {
  return pose_within(from_goal(achieved), from_goal(desired), trans_mm, angle_deg);
}

double compute_reward(const Goal& achieved, const Goal& desired, RewardMode mode, double trans_mm, double angle_deg) {
  const Pose a = from_goal(achieved);
  const Pose d = from_goal(desired);
  const double dt = translation_error(a, d);
  const double da = rotation_error(a, d);
  if (mode == RewardMode::Dense) return -(dt / 100.0 + da / 10.0);
  return (dt <= trans_mm && da <= angle_deg) ? 0.0 : -1.0;
}

Action clip_action(std::span<const double> action) {
  Action a{};
  for (int i = 0; i < kActionDim; ++i) {
    const double v = i < static_cast<int>(action.size()) ? action[i] : 0.0;
    a[i] = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
  }
  return a;
}

DeltaAction action_to_delta(const Action& a, const StepLimits& limits) {
  DeltaAction d;
  d.dpos = Vec3(a[0], a[1], a[2]).cwiseProduct(limits.dpos);
  d.drot = Vec3(a[3], a[4], a[5]).cwiseProduct(limits.drot);
  // jaw command in [0, delta_jaw]; below one half means closed
  d.jaw = (0.5 * (a[6] + 1.0) * limits.jaw) < 0.5 ? 0.0 : 1.0;
  return d;
}

Action delta_to_action(const DeltaAction& d, const StepLimits& limits) {
  Action a{};
  for (int i = 0; i < 3; ++i) {
    a[i] = std::clamp(d.dpos[i] / limits.dpos[i], -1.0, 1.0);
    a[3 + i] = std::clamp(d.drot[i] / limits.drot[i], -1.0, 1.0);
  }
  a[6] = d.jaw >= 0.5 ? 1.0 : -1.0;
  return a;
}

Goal to_goal(const Pose& p) { return Pose{p.position, canonical(p.orientation)}.to_array(); }
Pose from_goal(const Goal& g) { return Pose::from_array(g); }

SutureEnv::SutureEnv(ScenarioConfig cfg) {
  cfg.validate();
  stages_ = default_stages();
  first_ = last_ = cfg.subtask;
  max_steps_ = cfg.max_episode_steps;
  stages_[static_cast<int>(cfg.subtask)] = std::move(cfg);
}

SutureEnv SutureEnv::chain(const std::array<ScenarioConfig, kNumSubtasks>& stages, Subtask end_stage) {
  SutureEnv env;
  env.stages_ = stages;
  env.first_ = Subtask::Grasp;
  env.last_ = end_stage;
  env.chain_ = true;
  env.max_steps_ = 0;
  for (int k = 0; k <= static_cast<int>(end_stage); ++k) {
    if (stages[k].subtask != static_cast<Subtask>(k))
      throw ConfigError("chain: stage " + std::to_string(k) + " config has the wrong subtask");
    stages[k].validate();
    env.max_steps_ += stages[k].max_episode_steps;
  }
  return env;
}

EnvSpec EnvSpec::single(const ScenarioConfig& cfg) {
  EnvSpec spec;
  spec.stages = default_stages();
  spec.stages[static_cast<int>(cfg.subtask)] = cfg;
  spec.last = cfg.subtask;
  return spec;
}

EnvSpec EnvSpec::chained(const std::array<ScenarioConfig, kNumSubtasks>& stages, Subtask end_stage) {
  EnvSpec spec;
  spec.stages = stages;
  spec.last = end_stage;
  spec.chain = true;
  return spec;
}

EnvSpec EnvSpec::chained(Subtask end_stage) { return chained(default_stages(), end_stage); }

SutureEnv EnvSpec::make() const {
  return chain ? SutureEnv::chain(stages, last) : SutureEnv(goal_config());
}

std::uint64_t EnvSpec::fingerprint() const {
  if (!chain) return goal_config().fingerprint();
  std::string key = "chain:" + std::string(to_string(last));
  for (int k = 0; k <= static_cast<int>(last); ++k) key += ":" + std::to_string(stages[k].fingerprint());
  return jsonu::fnv1a(key);
}

Subtask SutureEnv::current_stage() const {
  for (int k = static_cast<int>(first_); k <= static_cast<int>(last_); ++k)
    if (!state_.completed[k]) return static_cast<Subtask>(k);
  return last_;
}

bool SutureEnv::stage_terminated(Subtask s) const { return stitch::stage_terminated(state_, stage_config(s)); }

void SutureEnv::reset_stage(Subtask s) {
  EnvState& st = state_;
  const ScenarioConfig& c = stage_config(s);
  const SceneGeometry& g = c.scene;
  auto& rng = st.rng;

  st.arms[0] = ArmState{g.arm0_home, 1.0};
  st.arms[1] = ArmState{g.arm1_home, 1.0};
  st.held_by = Holder::None;
  st.entered = st.exited = st.extracted = false;

  auto hold = [&](int arm, const Pose& grasp_local, double mm, double deg) {
    st.arms[arm].ee = st.needle * grasp_local * random_jitter(rng, mm, deg);
    st.arms[arm].jaw = 0.0;
    st.held_by = arm == 0 ? Holder::Arm0 : Holder::Arm1;
    st.needle_in_holder = st.arms[arm].ee.inverse() * st.needle;
  };
  auto resting_needle = [&] {
    const Vec3 center(uniform(rng, g.needle_region_min.x(), g.needle_region_max.x()),
                      uniform(rng, g.needle_region_min.y(), g.needle_region_max.y()),
                      uniform(rng, g.needle_region_min.z(), g.needle_region_max.z()));
    return needle::resting(center, uniform(rng, -g.needle_yaw_range_deg, g.needle_yaw_range_deg));
  };
  auto through_phantom = [&] {
    const double beta = needle::insert_progress_deg(g) + uniform(rng, -c.init_angle_jitter_deg, c.init_angle_jitter_deg);
    Pose n = needle::at_progress(g, beta);
    n.position += random_jitter(rng, c.init_pos_jitter_mm, 0.0).position;
    return n;
  };

  switch (s) {
    case Subtask::Grasp:
      st.needle = resting_needle();
      break;
    case Subtask::Place:
      st.needle = resting_needle();
      hold(0, needle::grasp_frame(g), c.grasp_jitter_mm, c.grasp_jitter_deg);
      break;
    case Subtask::Insert: {
      const Pose goal = needle::place_goal(g);
      Pose tip;
      // tip starts above the tissue so that entering is a real crossing
      do {
        tip = goal * random_jitter(rng, 0.0, c.init_angle_jitter_deg);
        tip.position += random_jitter(rng, c.init_pos_jitter_mm, 0.0).position;
      } while (tip.position.z() < g.suture_center.z() + 0.3);
      st.needle = tip * needle::tip_frame(g).inverse();
      hold(0, needle::grasp_frame(g), c.grasp_jitter_mm, c.grasp_jitter_deg);
      break;
    }
    case Subtask::Handoff:
      st.needle = through_phantom();
      st.entered = st.exited = true;
      hold(0, needle::grasp_frame(g), c.grasp_jitter_mm, c.grasp_jitter_deg);
      break;
    case Subtask::Pullout:
      st.needle = through_phantom();
      st.entered = st.exited = true;
      st.arms[0].ee = st.needle * needle::grasp_frame(g);
      st.arms[0].jaw = 1.0;
      hold(1, needle::handoff_frame(g), c.grasp_jitter_mm, c.grasp_jitter_deg);
      break;
  }
}

Observation SutureEnv::reset(std::uint64_t seed) {
  state_ = EnvState{};
  state_.rng.seed(seed);
  reset_stage(first_);
  for (int k = 0; k < static_cast<int>(first_); ++k) state_.completed[k] = true;
  return observe();
}

Observation SutureEnv::observe() const {
  const Subtask stage = current_stage();
  const ScenarioConfig& c = stage_config(stage);
  const ArmState& arm = state_.arms[active_arm(stage)];
  Observation obs;
  int k = 0;
  append_canonical(obs.vector, k, arm.ee);
  append_canonical(obs.vector, k, state_.needle);
  append_canonical(obs.vector, k, c.entry_pose());
  append_canonical(obs.vector, k, c.exit_pose());
  obs.vector[k++] = arm.jaw;
  obs.achieved_goal = to_goal(stage_achieved_goal(state_, config()));
  obs.desired_goal = to_goal(stage_desired_goal(state_, config()));
  return obs;
}

void SutureEnv::update_completions(int& newly_completed) {
  newly_completed = 0;
  for (int k = static_cast<int>(first_); k <= static_cast<int>(last_); ++k) {
    if (state_.completed[k]) continue;
    if (!success(state_, stages_[k])) break;
    state_.completed[k] = true;
    ++newly_completed;
  }
}

StepResult SutureEnv::step(std::span<const double> raw_action) {
  const Subtask stage = current_stage();
  const ScenarioConfig& c = stage_config(stage);
  const SceneGeometry& g = c.scene;
  const int arm_idx = active_arm(stage);
  EnvState& st = state_;
  ArmState& arm = st.arms[arm_idx];

  const Action a = clip_action(raw_action);
  const DeltaAction delta = action_to_delta(a, c.step_limits);

  const Pose tip_before = tip_pose(st, g);
  const Pose tail_before = st.needle * needle::tail_frame(g);

  const Vec3 old_pos = arm.ee.position;
  arm.ee = clamp_to_workspace(compose(arm.ee, delta), c.workspace);
  arm.jaw = delta.jaw;

  const bool holding = st.held_by == static_cast<Holder>(arm_idx);
  if (holding) {
    st.needle = arm.ee * st.needle_in_holder;
    if (!arm.jaw_closed()) st.held_by = Holder::None;
  } else if (arm.jaw_closed()) {
    const Pose target = designated_grasp(st, g, arm_idx);
    if ((arm.ee.position - target.position).norm() <= g.capture_radius_mm) {
      if (st.held_by != Holder::None) st.arms[1 - arm_idx].jaw = 1.0;
      st.held_by = static_cast<Holder>(arm_idx);
      st.needle_in_holder = arm.ee.inverse() * st.needle;
    }
  }

  const Vec3 tip_after = tip_pose(st, g).position;
  const Vec3 tail_after = (st.needle * needle::tail_frame(g)).position;
  const double surface = g.suture_center.z();
  if (!st.entered && crosses_hole(tip_before.position, tip_after, surface, g.entry_point(), g.hole_radius_mm, true))
    st.entered = true;
  if (st.entered && !st.exited &&
      crosses_hole(tip_before.position, tip_after, surface, g.exit_point(), g.hole_radius_mm, false))
    st.exited = true;
  if (st.exited && !st.extracted &&
      crosses_hole(tail_before.position, tail_after, surface, g.exit_point(), g.hole_radius_mm, false))
    st.extracted = true;

  ++st.step_count;

  int newly = 0;
  update_completions(newly);

  StepResult out;
  out.obs = observe();
  const ScenarioConfig& goal_cfg = config();
  const Pose ag = from_goal(out.obs.achieved_goal);
  const Pose dg = from_goal(out.obs.desired_goal);
  out.terminated = st.completed[static_cast<int>(last_)];
  out.truncated = !out.terminated && st.step_count >= max_steps_;
  out.reward = chain_ ? static_cast<double>(newly)
                      : compute_reward(out.obs.achieved_goal, out.obs.desired_goal, goal_cfg.reward_mode,
                                       goal_cfg.success_trans_mm, goal_cfg.success_angle_deg);
  out.info.is_success = out.terminated;
  out.info.d_trans = translation_error(ag, dg);
  out.info.d_angle = rotation_error(ag, dg);
  out.info.applied_translation_mm = (arm.ee.position - old_pos).norm();
  out.info.stage = stage;
  out.info.stages_completed = static_cast<int>(std::count(st.completed.begin(), st.completed.end(), true));
  return out;
}

double SutureEnv::goal_reward(const Goal& achieved, const Goal& desired) const {
  const ScenarioConfig& c = config();
  if (chain_) return goal_success(achieved, desired) ? 1.0 : 0.0;
  return compute_reward(achieved, desired, c.reward_mode, c.success_trans_mm, c.success_angle_deg);
}

bool SutureEnv::goal_success(const Goal& achieved, const Goal& desired) const {
  const ScenarioConfig& c = config();
  return goal_reached(achieved, desired, c.success_trans_mm, c.success_angle_deg);
}

std::optional<std::pair<double, double>> SutureEnv::value_bounds(double gamma) const {
  if (chain_ || config().reward_mode != RewardMode::Sparse) return std::nullopt;
  return std::pair{-1.0 / (1.0 - gamma), 0.0};
}

void write_trace_record(std::ostream& out, int step, const Observation& obs, const Action& action,
                        const StepResult& r) {
  jsonu::json j{{"step", step},
                {"obs", obs.vector},
                {"achieved_goal", obs.achieved_goal},
                {"desired_goal", obs.desired_goal},
                {"action", action},
                {"reward", r.reward},
                {"terminated", r.terminated},
                {"truncated", r.truncated},
                {"is_success", r.info.is_success},
                {"d_trans", r.info.d_trans},
                {"d_angle", r.info.d_angle},
                {"stage", static_cast<int>(r.info.stage)}};
  out << j.dump() << '\n';
}

}  // namespace stitch

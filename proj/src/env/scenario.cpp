#include "stitch/env/scenario.hpp"

#include <fstream>
#include <sstream>

#include "stitch/env/needle.hpp"
#include "stitch/error.hpp"
#include "stitch/json_util.hpp"

namespace stitch {

using jsonu::json;

std::string_view to_string(Subtask s) {
  switch (s) {
    case Subtask::Grasp: return "grasp";
    case Subtask::Place: return "place";
    case Subtask::Insert: return "insert";
    case Subtask::Handoff: return "handoff";
    case Subtask::Pullout: return "pullout";
  }
  return "?";
}

Subtask subtask_from_string(std::string_view name) {
  for (Subtask s : kAllSubtasks)
    if (to_string(s) == name) return s;
  throw ConfigError("unknown subtask '" + std::string(name) + "'");
}

std::string_view to_string(RewardMode m) { return m == RewardMode::Sparse ? "sparse" : "dense"; }

RewardMode reward_mode_from_string(std::string_view name) {
  if (name == "sparse") return RewardMode::Sparse;
  if (name == "dense") return RewardMode::Dense;
  throw ConfigError("unknown reward mode '" + std::string(name) + "'");
}

SceneGeometry::SceneGeometry() {
  arm0_home.position = Vec3(0.0, 22.0, 30.0);
  arm0_home.orientation = normalized(Quat(Eigen::AngleAxisd(deg2rad(135.0), Vec3::UnitZ()) *
                                          Eigen::AngleAxisd(deg2rad(180.0), Vec3::UnitX())));
  // Second arm waits beside the exit hole, roughly facing the handoff point.
  const Pose handoff = needle::at_progress(*this, needle::insert_progress_deg(*this)) * needle::handoff_frame(*this);
  arm1_home.position = handoff.position + Vec3(8.0, 18.0, 10.0);
  arm1_home.orientation = normalized(handoff.orientation * Quat(rpy_to_matrix(Vec3(15.0, -10.0, 30.0))));
}

Vec3 SceneGeometry::entry_point() const { return suture_center - Vec3(needle_radius_mm, 0.0, 0.0); }
Vec3 SceneGeometry::exit_point() const { return suture_center + Vec3(needle_radius_mm, 0.0, 0.0); }

Pose ScenarioConfig::entry_pose() const { return Pose{scene.entry_point(), Quat::Identity()}; }
Pose ScenarioConfig::exit_pose() const { return Pose{scene.exit_point(), Quat::Identity()}; }

ScenarioConfig default_config(Subtask subtask) {
  ScenarioConfig c;
  c.subtask = subtask;
  switch (subtask) {
    case Subtask::Grasp:
      c.success_trans_mm = 1.0;
      c.success_angle_deg = 10.0;
      // The tissue stops the tool just below the resting needle.
      c.workspace.min.z() = -1.0;
      break;
    case Subtask::Place:
      c.success_trans_mm = 5.0;
      c.success_angle_deg = 10.0;
      c.grasp_jitter_mm = 1.5;
      c.grasp_jitter_deg = 12.0;
      break;
    case Subtask::Insert:
      c.success_trans_mm = 5.0;
      c.success_angle_deg = 10.0;
      c.grasp_jitter_mm = 1.5;
      c.grasp_jitter_deg = 12.0;
      c.init_pos_jitter_mm = 5.5;
      c.init_angle_jitter_deg = 12.0;
      break;
    case Subtask::Handoff:
      c.success_trans_mm = 2.0;
      c.success_angle_deg = 15.0;
      c.grasp_jitter_mm = 1.5;
      c.grasp_jitter_deg = 12.0;
      c.init_angle_jitter_deg = 5.0;
      break;
    case Subtask::Pullout:
      c.success_trans_mm = 5.0;
      c.success_angle_deg = 20.0;
      c.grasp_jitter_mm = 1.5;
      c.grasp_jitter_deg = 20.0;
      c.init_angle_jitter_deg = 5.0;
      break;
  }
  return c;
}

void ScenarioConfig::validate() const {
  if (!(success_trans_mm > 0.0)) throw ConfigError("success_trans_mm: must be > 0");
  if (!(success_angle_deg > 0.0)) throw ConfigError("success_angle_deg: must be > 0");
  if (max_episode_steps < 1) throw ConfigError("max_episode_steps: must be >= 1");
  if (!(control_period_s > 0.0)) throw ConfigError("control_period_s: must be > 0");
  if (grasp_jitter_mm < 0 || grasp_jitter_deg < 0 || init_pos_jitter_mm < 0 || init_angle_jitter_deg < 0)
    throw ConfigError("jitter ranges must be non-negative");
  if (!workspace.valid()) throw ConfigError("workspace: min must be < max on every axis");
  if ((step_limits.dpos.array() <= 0.0).any() || (step_limits.drot.array() <= 0.0).any())
    throw ConfigError("step_limits: must be > 0");
  if (!(scene.needle_radius_mm > 0.0)) throw ConfigError("scene.needle_radius_mm: must be > 0");
  if (!(scene.hole_radius_mm > 0.0)) throw ConfigError("scene.hole_radius_mm: must be > 0");
  if (!(scene.capture_radius_mm > 0.0)) throw ConfigError("scene.capture_radius_mm: must be > 0");
  if ((scene.needle_region_min.array() > scene.needle_region_max.array()).any())
    throw ConfigError("scene.needle_region: min must be <= max");

  // Everything the reset distribution can produce must lie inside the
  // workspace. A resting needle lies flat, so it has no vertical extent.
  const Vec3 margin(scene.needle_radius_mm + grasp_jitter_mm, scene.needle_radius_mm + grasp_jitter_mm,
                    grasp_jitter_mm);
  WorkspaceBounds inner{workspace.min + margin, workspace.max - margin};
  if (!inner.valid() || !inner.contains(scene.needle_region_min) || !inner.contains(scene.needle_region_max))
    throw ConfigError("scene.needle_region: initialization range exceeds workspace bounds");
  if (!workspace.contains(scene.arm0_home.position) || !workspace.contains(scene.arm1_home.position))
    throw ConfigError("scene.arm_home: outside workspace bounds");
  if (subtask == Subtask::Grasp) return;
  // Later stages start from and aim at needle poses around the phantom.
  const Vec3 jitter = Vec3::Constant(init_pos_jitter_mm + grasp_jitter_mm + scene.needle_radius_mm);
  for (const Pose& goal : {needle::place_goal(scene), needle::insert_goal(scene), needle::pullout_goal(scene)}) {
    if (!workspace.contains(goal.position - jitter) || !workspace.contains(goal.position + jitter))
      throw ConfigError("init_pos_jitter_mm: initialization range exceeds workspace bounds");
  }
}

namespace {

json scene_to_json(const SceneGeometry& s) {
  return json{{"needle_radius_mm", s.needle_radius_mm},
              {"hole_radius_mm", s.hole_radius_mm},
              {"suture_center", jsonu::to_json(s.suture_center)},
              {"grasp_fraction_from_tail", s.grasp_fraction_from_tail},
              {"handoff_fraction_from_tip", s.handoff_fraction_from_tip},
              {"capture_radius_mm", s.capture_radius_mm},
              {"jaw_open_offset_mm", s.jaw_open_offset_mm},
              {"insert_exit_fraction", s.insert_exit_fraction},
              {"pullout_extra_deg", s.pullout_extra_deg},
              {"pullout_lift_mm", s.pullout_lift_mm},
              {"arm0_home", jsonu::to_json(s.arm0_home)},
              {"arm1_home", jsonu::to_json(s.arm1_home)},
              {"needle_region_min", jsonu::to_json(s.needle_region_min)},
              {"needle_region_max", jsonu::to_json(s.needle_region_max)},
              {"needle_yaw_range_deg", s.needle_yaw_range_deg}};
}

void scene_from_json(const json& j, SceneGeometry& s) {
  const std::string p = "scene";
  jsonu::check_keys(j, p,
                    {"needle_radius_mm", "hole_radius_mm", "suture_center", "grasp_fraction_from_tail",
                     "handoff_fraction_from_tip", "capture_radius_mm", "jaw_open_offset_mm", "insert_exit_fraction",
                     "pullout_extra_deg", "pullout_lift_mm", "arm0_home", "arm1_home", "needle_region_min",
                     "needle_region_max", "needle_yaw_range_deg"});
  auto num = [&](const char* k, double& dst) {
    if (j.contains(k)) dst = jsonu::number_at(j[k], p + "." + k);
  };
  num("needle_radius_mm", s.needle_radius_mm);
  num("hole_radius_mm", s.hole_radius_mm);
  if (j.contains("suture_center")) s.suture_center = jsonu::vec3_at(j["suture_center"], p + ".suture_center");
  num("grasp_fraction_from_tail", s.grasp_fraction_from_tail);
  num("handoff_fraction_from_tip", s.handoff_fraction_from_tip);
  num("capture_radius_mm", s.capture_radius_mm);
  num("jaw_open_offset_mm", s.jaw_open_offset_mm);
  num("insert_exit_fraction", s.insert_exit_fraction);
  num("pullout_extra_deg", s.pullout_extra_deg);
  num("pullout_lift_mm", s.pullout_lift_mm);
  if (j.contains("arm0_home")) s.arm0_home = jsonu::pose_at(j["arm0_home"], p + ".arm0_home");
  if (j.contains("arm1_home")) s.arm1_home = jsonu::pose_at(j["arm1_home"], p + ".arm1_home");
  if (j.contains("needle_region_min"))
    s.needle_region_min = jsonu::vec3_at(j["needle_region_min"], p + ".needle_region_min");
  if (j.contains("needle_region_max"))
    s.needle_region_max = jsonu::vec3_at(j["needle_region_max"], p + ".needle_region_max");
  num("needle_yaw_range_deg", s.needle_yaw_range_deg);
}

json config_to_json(const ScenarioConfig& c) {
  return json{{"subtask", std::string(to_string(c.subtask))},
              {"success_trans_mm", c.success_trans_mm},
              {"success_angle_deg", c.success_angle_deg},
              {"grasp_jitter_mm", c.grasp_jitter_mm},
              {"grasp_jitter_deg", c.grasp_jitter_deg},
              {"init_pos_jitter_mm", c.init_pos_jitter_mm},
              {"init_angle_jitter_deg", c.init_angle_jitter_deg},
              {"step_limits",
               {{"dpos", jsonu::to_json(c.step_limits.dpos)},
                {"drot", jsonu::to_json(c.step_limits.drot)},
                {"jaw", c.step_limits.jaw}}},
              {"workspace", {{"min", jsonu::to_json(c.workspace.min)}, {"max", jsonu::to_json(c.workspace.max)}}},
              {"scene", scene_to_json(c.scene)},
              {"max_episode_steps", c.max_episode_steps},
              {"reward_mode", std::string(to_string(c.reward_mode))},
              {"control_period_s", c.control_period_s}};
}

}  // namespace

ScenarioConfig scenario_from_json_text(std::string_view text) {
  const json j = jsonu::parse(text, "scenario");
  jsonu::check_keys(j, "",
                    {"subtask", "success_trans_mm", "success_angle_deg", "grasp_jitter_mm", "grasp_jitter_deg",
                     "init_pos_jitter_mm", "init_angle_jitter_deg", "step_limits", "workspace", "scene",
                     "max_episode_steps", "reward_mode", "control_period_s"});
  if (!j.contains("subtask")) throw ConfigError("subtask: required field missing");
  ScenarioConfig c = default_config(subtask_from_string(jsonu::string_at(j["subtask"], "subtask")));
  auto num = [&](const char* k, double& dst) {
    if (j.contains(k)) dst = jsonu::number_at(j[k], k);
  };
  num("success_trans_mm", c.success_trans_mm);
  num("success_angle_deg", c.success_angle_deg);
  num("grasp_jitter_mm", c.grasp_jitter_mm);
  num("grasp_jitter_deg", c.grasp_jitter_deg);
  num("init_pos_jitter_mm", c.init_pos_jitter_mm);
  num("init_angle_jitter_deg", c.init_angle_jitter_deg);
  num("control_period_s", c.control_period_s);
  if (j.contains("step_limits")) {
    const json& s = j["step_limits"];
    jsonu::check_keys(s, "step_limits", {"dpos", "drot", "jaw"});
    if (s.contains("dpos")) c.step_limits.dpos = jsonu::vec3_at(s["dpos"], "step_limits.dpos");
    if (s.contains("drot")) c.step_limits.drot = jsonu::vec3_at(s["drot"], "step_limits.drot");
    if (s.contains("jaw")) c.step_limits.jaw = jsonu::number_at(s["jaw"], "step_limits.jaw");
  }
  if (j.contains("workspace")) {
    const json& w = j["workspace"];
    jsonu::check_keys(w, "workspace", {"min", "max"});
    if (w.contains("min")) c.workspace.min = jsonu::vec3_at(w["min"], "workspace.min");
    if (w.contains("max")) c.workspace.max = jsonu::vec3_at(w["max"], "workspace.max");
  }
  if (j.contains("scene")) scene_from_json(j["scene"], c.scene);
  if (j.contains("max_episode_steps")) c.max_episode_steps = jsonu::integer_at(j["max_episode_steps"], "max_episode_steps");
  if (j.contains("reward_mode"))
    c.reward_mode = reward_mode_from_string(jsonu::string_at(j["reward_mode"], "reward_mode"));
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

std::string scenario_to_json_text(const ScenarioConfig& cfg) { return config_to_json(cfg).dump(2); }

std::uint64_t ScenarioConfig::fingerprint() const { return jsonu::fnv1a(config_to_json(*this).dump()); }

}  // namespace stitch

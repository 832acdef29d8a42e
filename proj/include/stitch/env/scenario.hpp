#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "stitch/pose.hpp"

namespace stitch {

enum class Subtask : int { Grasp = 0, Place = 1, Insert = 2, Handoff = 3, Pullout = 4 };
inline constexpr int kNumSubtasks = 5;
inline constexpr std::array<Subtask, kNumSubtasks> kAllSubtasks{
    Subtask::Grasp, Subtask::Place, Subtask::Insert, Subtask::Handoff, Subtask::Pullout};

std::string_view to_string(Subtask s);
Subtask subtask_from_string(std::string_view name);

enum class RewardMode { Sparse, Dense };
std::string_view to_string(RewardMode m);
RewardMode reward_mode_from_string(std::string_view name);

/// Phantom, needle and arm geometry shared by every subtask.
///
/// The needle is a rigid semicircle. In its own frame the arc lies in the xy
/// plane, centered at the origin, with the tip at angle 0 and the tail at 180
/// degrees; the tip advances along -y. The suture plane is the world xz plane
/// through `suture_center`: entry and exit holes sit one radius either side of
/// it on the tissue surface, so the tip meets the entry perpendicular to the
/// surface.
struct SceneGeometry {
  double needle_radius_mm = 5.0;
  double hole_radius_mm = 2.0;
  Vec3 suture_center = Vec3::Zero();

  // Grasp points as arc fractions (0 = tip, 1 = tail).
  double grasp_fraction_from_tail = 0.25;
  double handoff_fraction_from_tip = 0.25;

  double capture_radius_mm = 1.0;
  /// The jaw reference point retracts along the tool axis while the jaw is
  /// open, so an open gripper never scores a grasp goal from above the tissue.
  double jaw_open_offset_mm = 2.5;

  /// Arc fraction past the exit hole at the end of insertion.
  double insert_exit_fraction = 1.0 / 3.0;
  /// Extra tip rotation past full extraction, then lift, defining the pullout end point.
  double pullout_extra_deg = 30.0;
  double pullout_lift_mm = 15.0;

  Pose arm0_home;
  Pose arm1_home;

  // Needle rest region on the tissue surface (Grasp initialization).
  Vec3 needle_region_min{-25.0, 12.0, 0.0};
  Vec3 needle_region_max{25.0, 32.0, 0.0};
  double needle_yaw_range_deg = 45.0;

  SceneGeometry();

  Vec3 entry_point() const;
  Vec3 exit_point() const;
};

struct ScenarioConfig {
  Subtask subtask = Subtask::Grasp;
  double success_trans_mm = 1.0;
  double success_angle_deg = 10.0;
  /// Needle-in-jaw error at reset (Place/Insert/Handoff/Pullout).
  double grasp_jitter_mm = 0.0;
  double grasp_jitter_deg = 0.0;
  /// Needle-tip placement error at reset (Insert), needle pose jitter (Handoff/Pullout).
  double init_pos_jitter_mm = 0.0;
  double init_angle_jitter_deg = 0.0;
  StepLimits step_limits;
  WorkspaceBounds workspace;
  SceneGeometry scene;
  int max_episode_steps = 200;
  RewardMode reward_mode = RewardMode::Sparse;
  /// Seconds per environment step; sets demo timestamps.
  double control_period_s = 0.1;

  double needle_radius_mm() const { return scene.needle_radius_mm; }
  Pose entry_pose() const;
  Pose exit_pose() const;

  /// Throws ConfigError when an invariant fails.
  void validate() const;

  /// Stable hash over every field that affects dynamics, goals or rewards.
  std::uint64_t fingerprint() const;
};

/// Defaults per subtask: thresholds and initialization ranges of the five
/// suturing subtasks.
ScenarioConfig default_config(Subtask subtask);

/// Reads a JSON scenario file. Missing keys keep the subtask defaults.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig scenario_from_json_text(std::string_view text);
std::string scenario_to_json_text(const ScenarioConfig& cfg);

}  // namespace stitch

#pragma once

#include <vector>

#include "stitch/env/scenario.hpp"

// Rigid semicircular needle kinematics. Local frames are expressed in the
// needle frame (arc in the xy plane, tip at angle 0, tail at 180 degrees).
namespace stitch::needle {

/// Frame on the arc at angle `phi_deg`: x radial, z along the advancing tangent.
Pose arc_frame(const SceneGeometry& g, double phi_deg);

Pose tip_frame(const SceneGeometry& g);
Pose tail_frame(const SceneGeometry& g);

/// Grasp frames: origin on the arc, z axis (tool approach) along -needle z.
Pose grasp_frame(const SceneGeometry& g);
Pose handoff_frame(const SceneGeometry& g);

/// Needle pose in the suture plane after the tip advanced `progress_deg`
/// from the entry hole (0 = tip at entry, 180 = tip at exit).
Pose at_progress(const SceneGeometry& g, double progress_deg);

/// Inverse of at_progress for the rotational part, unwrapped into [lo, lo + 360).
double progress_of(const SceneGeometry& g, const Pose& needle, double lo_deg);

/// Progress at which the insertion subtask ends.
double insert_progress_deg(const SceneGeometry& g);
/// Progress at which the tail has cleared the exit hole plus the configured margin.
double pullout_progress_deg(const SceneGeometry& g);

Pose place_goal(const SceneGeometry& g);
Pose insert_goal(const SceneGeometry& g);
Pose pullout_needle_pose(const SceneGeometry& g);
Pose pullout_goal(const SceneGeometry& g);

/// Nominal needle pose lying flat on the tissue surface.
Pose resting(const Vec3& center, double yaw_deg);

std::vector<Vec3> arc_points(const SceneGeometry& g, const Pose& needle, int samples);

}  // namespace stitch::needle

#pragma once

#include <vector>

#include "synthworld/types.hpp"

namespace spwm::synthworld {

// Procedural ground-truth world: a ground-plane grid of flat Gaussians,
// clustered anisotropic static structures along the road sides, and
// constant-velocity dynamic primitives on the road. Deterministic in
// (seed, spec).
std::vector<GaussianPrimitive> make_scene(const SceneSpec& spec);

// Trajectory presets: straight (constant heading/speed), curve (constant yaw
// rate), lane-change (monotone lateral sigmoid reaching exactly lane_width).
EgoTrajectory make_trajectory(const SceneSpec& spec);

}  // namespace spwm::synthworld

#pragma once

#include <string>
#include <vector>

#include "common/image.hpp"
#include "splat/splat.hpp"
#include "synthworld/types.hpp"

namespace spwm::synthworld {

// Multi-camera, multi-timestep clip plus ego poses. Both the dataset unit
// and the generation target.
struct FrameSequence {
  SceneSpec spec;
  EgoTrajectory trajectory;
  std::vector<std::vector<Image>> frames;  // [t][camera]

  int t_steps() const { return static_cast<int>(frames.size()); }
  int cameras() const { return frames.empty() ? 0 : static_cast<int>(frames[0].size()); }
  CameraModel camera(int t, int c) const {
    return camera_at(spec.rig, c, trajectory.poses[static_cast<size_t>(t)]);
  }
};

splat::SplatConfig dataset_splat_config(const RigSpec& rig);

// Renders ground truth for every (t, camera): dynamic primitives advanced by
// t*dt*velocity, reference rasterizer, `t{TT}_c{C}.f64` (training source of
// truth) plus `.ppm` for inspection, and a manifest.json.
void render_dataset(const std::vector<GaussianPrimitive>& scene,
                    const EgoTrajectory& trajectory, const SceneSpec& spec,
                    const std::string& out_dir);

FrameSequence load_dataset(const std::string& dir);

// Scene primitives at time index t (dynamics advanced).
std::vector<GaussianPrimitive> scene_at_time(const std::vector<GaussianPrimitive>& scene,
                                             double seconds);

}  // namespace spwm::synthworld

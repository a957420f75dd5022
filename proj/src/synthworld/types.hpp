#pragma once

#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/geom.hpp"

namespace spwm::synthworld {

// Pinhole intrinsics plus rigid world-to-camera extrinsics.
struct CameraModel {
  double fx = 40, fy = 40, cx = 32, cy = 32;
  int width = 64, height = 64;
  Mat3 R;     // world-to-camera rotation
  Vec3 tvec;  // world-to-camera translation (meters)

  Vec3 to_camera(const Vec3& p) const { return R * p + tvec; }
  void validate() const;
};

// One explicit 3D Gaussian.
struct GaussianPrimitive {
  Vec3 center;                        // meters, world frame
  double qw = 1, qx = 0, qy = 0, qz = 0;  // unit quaternion
  Vec3 scale{0.1, 0.1, 0.1};          // per-axis stddev, meters, > 0
  double opacity = 0.5;               // [0,1]
  Vec3 color{0.5, 0.5, 0.5};          // RGB, [0,1]
  Vec3 velocity;                      // m/s, zero for static

  void validate() const;
  GaussianPrimitive advanced(double seconds) const {
    GaussianPrimitive g = *this;
    g.center = center + velocity * seconds;
    return g;
  }
};

// Per-timestep rigid transforms, ego-to-world.
struct EgoTrajectory {
  std::vector<Pose> poses;
  double dt = 0.1;

  int length() const { return static_cast<int>(poses.size()); }
  void validate() const;
};

// Fixed 3-camera rig; extrinsics constant in the ego frame. yaw_deg is
// measured clockwise from forward (so front-left is -45).
struct RigSpec {
  int width = 64, height = 64;
  double fx = 40, fy = 40;
  double cam_height = 1.6;                      // meters above ground
  std::vector<double> yaw_deg = {0.0, -45.0, 45.0};
  Vec3 background{0.10, 0.12, 0.15};

  int num_cameras() const { return static_cast<int>(yaw_deg.size()); }
};

struct TrajectorySpec {
  std::string preset = "straight";  // straight | curve | lane-change
  double speed = 5.0;               // m/s
  double yaw_rate = 0.15;           // rad/s (curve)
  double lane_width = 3.5;          // meters (lane-change)
};

struct SceneSpec {
  uint64_t seed = 1;
  double extent = 50.0;  // meters of forward coverage
  int n_ground = 100;
  int n_static = 20;
  int n_dynamic = 2;
  TrajectorySpec trajectory;
  int t_steps = 12;
  double dt = 0.1;
  RigSpec rig;

  void validate() const;
};

// Camera-from-ego pose for one rig slot.
Pose rig_camera_pose(const RigSpec& rig, int cam_index);

// World-to-camera model at a given ego pose.
CameraModel camera_at(const RigSpec& rig, int cam_index, const Pose& ego_to_world);

}  // namespace spwm::synthworld

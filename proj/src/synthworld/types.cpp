#include "synthworld/types.hpp"

#include <cmath>

namespace spwm::synthworld {

void CameraModel::validate() const {
  SPWM_CHECK(fx > 0 && fy > 0, "camera focal lengths must be positive, got fx=",
             fx, " fy=", fy);
  SPWM_CHECK(width > 0 && height > 0, "camera image size must be positive");
  // R^T R = I within 1e-9 and det(R) = +1
  Mat3 rtr = R.transposed() * R;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      SPWM_CHECK(std::fabs(rtr(i, j) - want) < 1e-9,
                 "camera rotation is not orthonormal");
    }
  const double det = R(0, 0) * (R(1, 1) * R(2, 2) - R(1, 2) * R(2, 1)) -
                     R(0, 1) * (R(1, 0) * R(2, 2) - R(1, 2) * R(2, 0)) +
                     R(0, 2) * (R(1, 0) * R(2, 1) - R(1, 1) * R(2, 0));
  SPWM_CHECK(std::fabs(det - 1.0) < 1e-9, "camera rotation determinant ", det,
             " != +1");
}

void GaussianPrimitive::validate() const {
  const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
  SPWM_CHECK(std::fabs(qn - 1.0) < 1e-9, "quaternion norm ", qn, " != 1");
  SPWM_CHECK(scale.x > 0 && scale.y > 0 && scale.z > 0,
             "gaussian scale must be positive componentwise");
  SPWM_CHECK(opacity >= 0 && opacity <= 1, "opacity ", opacity, " outside [0,1]");
  for (double c : {color.x, color.y, color.z})
    SPWM_CHECK(c >= 0 && c <= 1, "color channel ", c, " outside [0,1]");
}

void EgoTrajectory::validate() const {
  SPWM_CHECK(!poses.empty(), "trajectory has no poses");
  for (const auto& p : poses) {
    Mat3 rtr = p.R.transposed() * p.R;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double want = i == j ? 1.0 : 0.0;
        SPWM_CHECK(std::fabs(rtr(i, j) - want) < 1e-9,
                   "trajectory rotation is not orthonormal");
      }
  }
}

void SceneSpec::validate() const {
  SPWM_CHECK(n_ground >= 0 && n_static >= 0 && n_dynamic >= 0,
             "primitive counts must be >= 0");
  SPWM_CHECK(t_steps >= 2, "sequence length must be >= 2, got ", t_steps);
  SPWM_CHECK(dt > 0, "dt must be positive");
  SPWM_CHECK(extent > 0, "extent must be positive");
  SPWM_CHECK(trajectory.preset == "straight" || trajectory.preset == "curve" ||
                 trajectory.preset == "lane-change",
             "unknown trajectory preset '", trajectory.preset, "'");
}

Pose rig_camera_pose(const RigSpec& rig, int cam_index) {
  SPWM_CHECK(cam_index >= 0 && cam_index < rig.num_cameras(), "camera index ",
             cam_index, " out of range");
  // Ego frame: x forward, y left, z up. Camera frame: x right, y down,
  // z forward. yaw_deg clockwise from forward.
  const double psi = -rig.yaw_deg[static_cast<size_t>(cam_index)] * M_PI / 180.0;
  Mat3 base;  // cam axes in terms of ego axes (camera-from-ego, yaw 0)
  base.m = {0, -1, 0,   // cam x = -ego y
            0, 0, -1,   // cam y = -ego z
            1, 0, 0};   // cam z = +ego x
  const Mat3 r_cam_from_ego = base * Mat3::rot_z(-psi);
  const Vec3 center{0, 0, rig.cam_height};
  const Vec3 t = r_cam_from_ego * center;
  return {r_cam_from_ego, {-t.x, -t.y, -t.z}};
}

CameraModel camera_at(const RigSpec& rig, int cam_index, const Pose& ego_to_world) {
  const Pose cam_from_ego = rig_camera_pose(rig, cam_index);
  const Pose cam_from_world = cam_from_ego.compose(ego_to_world.inverse());
  CameraModel cam;
  cam.fx = rig.fx;
  cam.fy = rig.fy;
  cam.width = rig.width;
  cam.height = rig.height;
  cam.cx = rig.width / 2.0;
  cam.cy = rig.height / 2.0;
  cam.R = cam_from_world.R;
  cam.tvec = cam_from_world.t;
  return cam;
}

}  // namespace spwm::synthworld

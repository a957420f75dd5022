#pragma once

#include "json.hpp"
#include "synthworld/types.hpp"

namespace spwm {

inline void to_json(nlohmann::json& j, const Vec3& v) { j = {v.x, v.y, v.z}; }
inline void from_json(const nlohmann::json& j, Vec3& v) {
  v = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline void to_json(nlohmann::json& j, const Pose& p) {
  j = nlohmann::json{{"R", p.R.m}, {"t", p.t}};
}
inline void from_json(const nlohmann::json& j, Pose& p) {
  p.R.m = j.at("R").get<std::array<double, 9>>();
  p.t = j.at("t").get<Vec3>();
}

namespace synthworld {

inline void to_json(nlohmann::json& j, const RigSpec& r) {
  j = nlohmann::json{{"width", r.width},   {"height", r.height},
                     {"fx", r.fx},         {"fy", r.fy},
                     {"cam_height", r.cam_height}, {"yaw_deg", r.yaw_deg},
                     {"background", r.background}};
}
inline void from_json(const nlohmann::json& j, RigSpec& r) {
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.fx = j.at("fx").get<double>();
  r.fy = j.at("fy").get<double>();
  r.cam_height = j.at("cam_height").get<double>();
  r.yaw_deg = j.at("yaw_deg").get<std::vector<double>>();
  r.background = j.at("background").get<Vec3>();
}

inline void to_json(nlohmann::json& j, const TrajectorySpec& t) {
  j = nlohmann::json{{"preset", t.preset},
                     {"speed", t.speed},
                     {"yaw_rate", t.yaw_rate},
                     {"lane_width", t.lane_width}};
}
inline void from_json(const nlohmann::json& j, TrajectorySpec& t) {
  t.preset = j.at("preset").get<std::string>();
  t.speed = j.at("speed").get<double>();
  t.yaw_rate = j.at("yaw_rate").get<double>();
  t.lane_width = j.at("lane_width").get<double>();
}

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"seed", s.seed},        {"extent", s.extent},
                     {"n_ground", s.n_ground}, {"n_static", s.n_static},
                     {"n_dynamic", s.n_dynamic}, {"trajectory", s.trajectory},
                     {"t_steps", s.t_steps},  {"dt", s.dt},
                     {"rig", s.rig}};
}
inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.seed = j.at("seed").get<uint64_t>();
  s.extent = j.at("extent").get<double>();
  s.n_ground = j.at("n_ground").get<int>();
  s.n_static = j.at("n_static").get<int>();
  s.n_dynamic = j.at("n_dynamic").get<int>();
  s.trajectory = j.at("trajectory").get<TrajectorySpec>();
  s.t_steps = j.at("t_steps").get<int>();
  s.dt = j.at("dt").get<double>();
  s.rig = j.at("rig").get<RigSpec>();
}

inline void to_json(nlohmann::json& j, const GaussianPrimitive& g) {
  j = nlohmann::json{{"center", g.center},
                     {"rotation", {g.qw, g.qx, g.qy, g.qz}},
                     {"scale", g.scale},
                     {"opacity", g.opacity},
                     {"color", g.color},
                     {"velocity", g.velocity}};
}
inline void from_json(const nlohmann::json& j, GaussianPrimitive& g) {
  g.center = j.at("center").get<Vec3>();
  const auto& q = j.at("rotation");
  g.qw = q.at(0).get<double>();
  g.qx = q.at(1).get<double>();
  g.qy = q.at(2).get<double>();
  g.qz = q.at(3).get<double>();
  g.scale = j.at("scale").get<Vec3>();
  g.opacity = j.at("opacity").get<double>();
  g.color = j.at("color").get<Vec3>();
  g.velocity = j.at("velocity").get<Vec3>();
}

}  // namespace synthworld
}  // namespace spwm

#include "synthworld/scene.hpp"

#include <cmath>

#include "numcore/rng.hpp"

namespace spwm::synthworld {

using numcore::Rng;

namespace {

void normalize_quat(GaussianPrimitive& g) {
  const double n = std::sqrt(g.qw * g.qw + g.qx * g.qx + g.qy * g.qy + g.qz * g.qz);
  g.qw /= n;
  g.qx /= n;
  g.qy /= n;
  g.qz /= n;
}

Vec3 random_color(Rng& rng) {
  return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
}

}  // namespace

std::vector<GaussianPrimitive> make_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, 101);
  std::vector<GaussianPrimitive> prims;
  prims.reserve(static_cast<size_t>(spec.n_ground + spec.n_static + spec.n_dynamic));

  // Ground: grid of flat tiles over the query region, x in [-ext/5, 4ext/5],
  // y in [-0.3 ext, 0.3 ext].
  const double x0 = -spec.extent / 5.0, x1 = 4.0 * spec.extent / 5.0;
  const double y0 = -0.3 * spec.extent, y1 = 0.3 * spec.extent;
  if (spec.n_ground > 0) {
    const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_ground))));
    const double dx = (x1 - x0) / g, dy = (y1 - y0) / g;
    int made = 0;
    for (int iy = 0; iy < g && made < spec.n_ground; ++iy)
      for (int ix = 0; ix < g && made < spec.n_ground; ++ix, ++made) {
        GaussianPrimitive p;
        p.center = {x0 + (ix + 0.5) * dx + rng.uniform(-0.2, 0.2) * dx,
                    y0 + (iy + 0.5) * dy + rng.uniform(-0.2, 0.2) * dy, 0.0};
        p.scale = {0.65 * dx, 0.65 * dy, 0.02};
        p.opacity = rng.uniform(0.85, 0.98);
        p.color = random_color(rng);
        prims.push_back(p);
      }
  }

  // Static clusters ("buildings") along both road sides.
  if (spec.n_static > 0) {
    const int per_cluster = 5;
    Vec3 cluster{0, 8, 1.2};
    for (int i = 0; i < spec.n_static; ++i) {
      if (i % per_cluster == 0) {
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        cluster = {rng.uniform(2.0, x1 - 2.0), side * rng.uniform(5.5, 0.28 * spec.extent),
                   rng.uniform(0.5, 2.5)};
      }
      GaussianPrimitive p;
      p.center = {cluster.x + rng.normal() * 1.2, cluster.y + rng.normal() * 1.2,
                  std::max(0.1, cluster.z + rng.normal() * 0.8)};
      p.scale = {rng.uniform(0.4, 2.0), rng.uniform(0.4, 2.0), rng.uniform(0.4, 2.0)};
      p.qw = rng.normal();
      p.qx = rng.normal();
      p.qy = rng.normal();
      p.qz = rng.normal();
      normalize_quat(p);
      p.opacity = rng.uniform(0.6, 0.95);
      p.color = random_color(rng);
      prims.push_back(p);
    }
  }

  // Dynamic primitives: vehicle-sized, constant velocity along the road.
  for (int i = 0; i < spec.n_dynamic; ++i) {
    GaussianPrimitive p;
    p.center = {rng.uniform(5.0, 0.6 * spec.extent), rng.uniform(-3.5, 3.5),
                rng.uniform(0.3, 0.8)};
    const double k = rng.uniform(0.8, 1.2);
    p.scale = {1.8 * k, 0.8 * k, 0.5 * k};
    p.opacity = rng.uniform(0.7, 0.95);
    p.color = random_color(rng);
    const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
    p.velocity = {dir * rng.uniform(2.0, 8.0), 0.0, 0.0};
    prims.push_back(p);
  }

  for (const auto& p : prims) p.validate();
  return prims;
}

EgoTrajectory make_trajectory(const SceneSpec& spec) {
  spec.validate();
  const TrajectorySpec& ts = spec.trajectory;
  EgoTrajectory traj;
  traj.dt = spec.dt;
  traj.poses.reserve(static_cast<size_t>(spec.t_steps));
  const double v = ts.speed;

  if (ts.preset == "straight" || (ts.preset == "curve" && std::fabs(ts.yaw_rate) < 1e-12)) {
    for (int t = 0; t < spec.t_steps; ++t)
      traj.poses.push_back(Pose{Mat3::identity(), {v * t * spec.dt, 0, 0}});
  } else if (ts.preset == "curve") {
    const double om = ts.yaw_rate;
    for (int t = 0; t < spec.t_steps; ++t) {
      const double psi = om * t * spec.dt;
      traj.poses.push_back(
          Pose{Mat3::rot_z(psi), {(v / om) * std::sin(psi), (v / om) * (1 - std::cos(psi)), 0}});
    }
  } else {  // lane-change
    const double k = 10.0;
    auto sigma = [](double a) { return 1.0 / (1.0 + std::exp(-a)); };
    const double lo = sigma(-k / 2), hi = sigma(k / 2);
    for (int t = 0; t < spec.t_steps; ++t) {
      const double u = spec.t_steps > 1 ? static_cast<double>(t) / (spec.t_steps - 1) : 0.0;
      const double s = (sigma(k * (u - 0.5)) - lo) / (hi - lo);
      traj.poses.push_back(Pose{Mat3::identity(), {v * t * spec.dt, ts.lane_width * s, 0}});
    }
  }
  traj.validate();
  return traj;
}

}  // namespace spwm::synthworld

#include "synthworld/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "synthworld/serialize.hpp"

namespace spwm::synthworld {

namespace fs = std::filesystem;
using nlohmann::json;

splat::SplatConfig dataset_splat_config(const RigSpec& rig) {
  splat::SplatConfig cfg;
  cfg.background = rig.background;
  return cfg;
}

std::vector<GaussianPrimitive> scene_at_time(const std::vector<GaussianPrimitive>& scene,
                                             double seconds) {
  std::vector<GaussianPrimitive> out;
  out.reserve(scene.size());
  for (const auto& g : scene) out.push_back(g.advanced(seconds));
  return out;
}

namespace {
std::string frame_name(int t, int c, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%02d_c%d.%s", t, c, ext);
  return buf;
}
}  // namespace

void render_dataset(const std::vector<GaussianPrimitive>& scene,
                    const EgoTrajectory& trajectory, const SceneSpec& spec,
                    const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  SPWM_IO_CHECK(!ec, "cannot create output directory '", out_dir, "'");

  const splat::SplatConfig cfg = dataset_splat_config(spec.rig);
  std::vector<std::string> files;
  for (int t = 0; t < trajectory.length(); ++t) {
    const auto prims_t = scene_at_time(scene, t * trajectory.dt);
    for (int c = 0; c < spec.rig.num_cameras(); ++c) {
      const CameraModel cam = camera_at(spec.rig, c, trajectory.poses[static_cast<size_t>(t)]);
      const Image img = splat::rasterize_reference(prims_t, cam, cfg).image();
      const std::string base = out_dir + "/" + frame_name(t, c, "f64");
      save_f64(base, img);
      save_ppm(out_dir + "/" + frame_name(t, c, "ppm"), img);
      files.push_back(frame_name(t, c, "f64"));
    }
  }

  json manifest;
  manifest["spec"] = spec;
  manifest["poses"] = trajectory.poses;
  manifest["dt"] = trajectory.dt;
  manifest["files"] = files;
  std::ofstream os(out_dir + "/manifest.json", std::ios::trunc);
  SPWM_IO_CHECK(os.good(), "cannot write manifest in '", out_dir, "'");
  os << manifest.dump(2) << "\n";
  SPWM_IO_CHECK(os.good(), "write failure for manifest in '", out_dir, "'");
}

FrameSequence load_dataset(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  SPWM_IO_CHECK(is.good(), "cannot open manifest in '", dir, "'");
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw IoError(strcat_msg("malformed manifest in '", dir, "': ", e.what()));
  }
  FrameSequence seq;
  seq.spec = manifest.at("spec").get<SceneSpec>();
  seq.trajectory.dt = manifest.at("dt").get<double>();
  seq.trajectory.poses = manifest.at("poses").get<std::vector<Pose>>();
  const int cams = seq.spec.rig.num_cameras();
  const int t_steps = seq.trajectory.length();
  seq.frames.assign(static_cast<size_t>(t_steps), {});
  for (int t = 0; t < t_steps; ++t) {
    seq.frames[static_cast<size_t>(t)].reserve(static_cast<size_t>(cams));
    for (int c = 0; c < cams; ++c)
      seq.frames[static_cast<size_t>(t)].push_back(load_f64(
          dir + "/" + frame_name(t, c, "f64"), seq.spec.rig.height, seq.spec.rig.width));
  }
  return seq;
}

}  // namespace spwm::synthworld

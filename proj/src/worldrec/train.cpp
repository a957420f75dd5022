#include "worldrec/train.hpp"

#include <cmath>
#include <cstdio>

#include "metrics/metrics.hpp"
#include "numcore/rng.hpp"
#include "splat/rasterize_op.hpp"

namespace spwm::worldrec {

using namespace numcore;
using synthworld::CameraModel;
using synthworld::FrameSequence;

namespace {

Tensor render_rgb(const DecodedScene& scene, const CameraModel& cam,
                  const splat::SplatConfig& cfg) {
  Tensor rgba = splat::rasterize_op(scene.centers, scene.quats, scene.scales,
                                    scene.opacities, scene.colors, cam, cfg);
  const int h = rgba.dim(0), w = rgba.dim(1);
  return reshape(slice_cols(reshape(rgba, {h * w, 4}), 0, 3), {h, w, 3});
}

}  // namespace

RecTrainResult train_rec(RecModel& model, const FrameSequence& seq,
                         const TrainRecOptions& opt) {
  SPWM_CHECK(!opt.context_cams.empty() && !opt.target_cams.empty(),
             "train_rec: camera lists must not be empty");
  Rng rng(opt.seed, 11);
  Adam adam({opt.lr, 0.9, 0.999, 1e-8});
  const GeometryCache geo = model.build_geometry(seq, opt.context_cams);
  const splat::SplatConfig render_cfg = synthworld::dataset_splat_config(seq.spec.rig);

  // ground truth and its filter responses are step-invariant
  const int t_steps = seq.t_steps();
  std::vector<std::vector<Tensor>> gt(static_cast<size_t>(t_steps));
  std::vector<std::vector<Tensor>> gt_sobel(static_cast<size_t>(t_steps));
  for (int t = 0; t < t_steps; ++t)
    for (int c : opt.target_cams) {
      gt[static_cast<size_t>(t)].push_back(image_hwc(seq.frames[static_cast<size_t>(t)][static_cast<size_t>(c)]));
      gt_sobel[static_cast<size_t>(t)].push_back(sobel_response(gt[static_cast<size_t>(t)].back()));
    }

  std::vector<Tensor> chw_cache;
  for (int t = 0; t < t_steps; ++t)
    for (int c : opt.context_cams)
      chw_cache.push_back(image_chw(seq.frames[static_cast<size_t>(t)][static_cast<size_t>(c)]));

  RecTrainResult res;
  for (int step = 0; step < opt.steps; ++step) {
    const int t_target = static_cast<int>(rng.uniform_int(t_steps));
    Tape tape;
    Tape::Scope scope(tape);
    model.params().bind(tape);
    const FeaturePyramid features = model.extract_features_chw(
        chw_cache, t_steps, static_cast<int>(opt.context_cams.size()));
    const Tensor tokens = model.aggregate(features, geo);
    const DecodedScene scene = model.decode(tokens);

    Tensor loss;
    for (size_t ci = 0; ci < opt.target_cams.size(); ++ci) {
      const CameraModel cam = seq.camera(t_target, opt.target_cams[ci]);
      Tensor rendered = render_rgb(scene, cam, render_cfg);
      Tensor l = reconstruction_loss(rendered, gt[static_cast<size_t>(t_target)][ci],
                                     gt_sobel[static_cast<size_t>(t_target)][ci],
                                     model.config().lambda_grad);
      loss = ci == 0 ? l : add(loss, l);
    }
    loss = scale(loss, 1.0 / static_cast<double>(opt.target_cams.size()));

    const double lv = loss.item();
    SPWM_CHECK(std::isfinite(lv), "train_rec: non-finite loss at step ", step);
    if (step == 0) res.initial_loss = lv;
    res.final_loss = lv;
    tape.backward(loss);
    adam.step(model.params(), tape);
    res.steps_run = step + 1;
    if (opt.log_every > 0 && (step % opt.log_every == 0 || step == opt.steps - 1))
      std::fprintf(stderr, "[train-rec] step %d loss %.6f\n", step, lv);
  }
  model.params().bind_frozen();
  return res;
}

DecodedScene reconstruct(RecModel& model, const FrameSequence& seq,
                         const std::vector<int>& context_cams) {
  model.params().bind_frozen();
  const GeometryCache geo = model.build_geometry(seq, context_cams);
  const FeaturePyramid features = model.extract_features(seq, context_cams);
  const Tensor tokens = model.aggregate(features, geo);
  return model.decode(tokens);
}

Image render_scene_view(const DecodedScene& scene, const CameraModel& cam,
                        const splat::SplatConfig& cfg) {
  splat::PrimArrays arrays{scene.centers.data(), scene.quats.data(), scene.scales.data(),
                           scene.opacities.data(), scene.colors.data(), scene.centers.dim(0)};
  return splat::rasterize_tiled(arrays, cam, cfg).image();
}

double mean_view_psnr(const DecodedScene& scene, const FrameSequence& seq,
                      const std::vector<int>& cams) {
  const splat::SplatConfig cfg = synthworld::dataset_splat_config(seq.spec.rig);
  double total = 0;
  int count = 0;
  for (int t = 0; t < seq.t_steps(); ++t)
    for (int c : cams) {
      const Image rendered = render_scene_view(scene, seq.camera(t, c), cfg);
      total += metrics::psnr(rendered, seq.frames[static_cast<size_t>(t)][static_cast<size_t>(c)]);
      count++;
    }
  return total / count;
}

double background_psnr(const FrameSequence& seq, const std::vector<int>& cams) {
  Image bg(seq.spec.rig.height, seq.spec.rig.width);
  for (int i = 0; i < bg.h * bg.w; ++i) {
    bg.rgb[static_cast<size_t>(i) * 3 + 0] = seq.spec.rig.background.x;
    bg.rgb[static_cast<size_t>(i) * 3 + 1] = seq.spec.rig.background.y;
    bg.rgb[static_cast<size_t>(i) * 3 + 2] = seq.spec.rig.background.z;
  }
  double total = 0;
  int count = 0;
  for (int t = 0; t < seq.t_steps(); ++t)
    for (int c : cams) {
      total += metrics::psnr(bg, seq.frames[static_cast<size_t>(t)][static_cast<size_t>(c)]);
      count++;
    }
  return total / count;
}

}  // namespace spwm::worldrec

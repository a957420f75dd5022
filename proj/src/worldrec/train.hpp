#pragma once

#include "numcore/adam.hpp"
#include "worldrec/model.hpp"

namespace spwm::worldrec {

struct TrainRecOptions {
  int steps = 2000;
  double lr = 3e-3;
  uint64_t seed = 1;
  std::vector<int> context_cams = {0, 1, 2};
  std::vector<int> target_cams = {0, 1, 2};
  int log_every = 200;
};

struct RecTrainResult {
  double initial_loss = 0;
  double final_loss = 0;
  int steps_run = 0;
};

// Rendering-supervised training on one clip: Adam on encoder, aggregation
// net, decoder, query embeddings and null token. Loss over all target rig
// views at a sampled timestep per step. Aborts with the step index on a
// non-finite loss.
RecTrainResult train_rec(RecModel& model, const synthworld::FrameSequence& seq,
                         const TrainRecOptions& opt);

// Full feed-forward pass: align -> project -> sample -> aggregate -> decode.
DecodedScene reconstruct(RecModel& model, const synthworld::FrameSequence& seq,
                         const std::vector<int>& context_cams);

Image render_scene_view(const DecodedScene& scene, const synthworld::CameraModel& cam,
                        const splat::SplatConfig& cfg);

// Mean PSNR of re-rendered views against ground truth over the given cameras.
double mean_view_psnr(const DecodedScene& scene, const synthworld::FrameSequence& seq,
                      const std::vector<int>& cams);

// PSNR of a constant background-color image against ground truth (baseline).
double background_psnr(const synthworld::FrameSequence& seq, const std::vector<int>& cams);

}  // namespace spwm::worldrec

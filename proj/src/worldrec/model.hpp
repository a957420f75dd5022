#pragma once

#include <vector>

#include "numcore/ops.hpp"
#include "numcore/params.hpp"
#include "splat/splat.hpp"
#include "synthworld/dataset.hpp"

namespace spwm::worldrec {

using numcore::Param;
using numcore::ParamSet;
using numcore::Tensor;

struct RecConfig {
  // sparse query grid over the ego frustum union
  int grid_x = 16, grid_y = 16, grid_z = 8;  // 2048 queries
  double qx0 = -10, qx1 = 40;
  double qy0 = -15, qy1 = 15;
  double qz0 = -0.5, qz1 = 4;

  int d_f = 8;         // feature channels (both pyramid scales)
  int d_q = 16;        // scene token dim
  int agg_hidden = 16;
  int dec_hidden = 32;

  double delta_max = 2.0;    // meters, center offset range
  double s_min = 0.01;       // meters, scale floor
  double alpha_bias = -2.0;  // decoder opacity bias init
  double scale_bias = -2.0;  // decoder scale bias init
  double lambda_grad = 0.1;  // gradient-domain loss weight

  int n_queries() const { return grid_x * grid_y * grid_z; }
};

// image <-> tensor layout converters
Tensor image_chw(const Image& img);           // [3,H,W]
Tensor image_hwc(const Image& img);           // [H,W,3]
Image tensor_to_image(const Tensor& hwc);     // from [H,W,3]

// Reference point expressed in the ego frame of t_to, given it was expressed
// in the ego frame of t_from (static-world rigid alignment).
Vec3 align_temporal(const Vec3& p, int t_from, int t_to,
                    const synthworld::EgoTrajectory& traj);

// Pinhole query projection; visible iff depth > 0.1 m and uv in bounds.
struct QueryProjection {
  double u = 0, v = 0;
  bool visible = false;
};
QueryProjection project_query(const Vec3& p, const synthworld::CameraModel& cam);

// Two-scale feature maps per (t, camera): scale 0 at H/2, scale 1 at H/4.
struct FeaturePyramid {
  int t_steps = 0, cameras = 0;
  std::vector<Tensor> scale0, scale1;  // indexed t*cameras + c

  const Tensor& at(int t, int c, int level) const {
    const size_t i = static_cast<size_t>(t) * cameras + c;
    return level == 0 ? scale0[i] : scale1[i];
  }
};

// Precomputed projection geometry for a fixed (queries, rig, trajectory)
// triple; constant across training steps.
struct GeometryCache {
  int n = 0, slots_per_query = 0;
  std::vector<uint8_t> vis;  // [N * S], softmax mask
  struct Slot {
    int t = 0, c = 0, level = 0;
    std::vector<int> q_idx;     // visible query indices
    std::vector<double> uv;     // feature-grid coords, 2 per visible query
    std::vector<double> dirs;   // unit view directions, 3 per visible query
  };
  std::vector<Slot> slots;
  std::vector<int> scatter_idx;  // dense row i*S+s per visible sample, slot order
  // step-invariant constants over all visible samples, slot order
  Tensor dirs_all;               // [M,3]
  std::vector<int> qidx_all;     // [M]
  std::vector<int> level_all;    // [M], pyramid level per sample
};

// Decoded gaussians as attribute tensors (activation-enforced invariants).
struct DecodedScene {
  Tensor centers;    // [N,3]
  Tensor quats;      // [N,4], unit rows
  Tensor scales;     // [N,3], >= s_min
  Tensor opacities;  // [N]
  Tensor colors;     // [N,3]
  Tensor tokens;     // [N,d_q] cache for fusion

  std::vector<synthworld::GaussianPrimitive> primitives() const;
};

class RecModel {
 public:
  RecModel(const RecConfig& cfg, uint64_t seed);

  const RecConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const std::vector<Vec3>& ref_points() const { return ref_points_; }
  const Tensor& ref_tensor() const { return ref_tensor_; }

  // Shared-weight two-scale conv encoder on one [3,H,W] image.
  void encode_image(const Tensor& chw, Tensor* s0, Tensor* s1) const;
  FeaturePyramid extract_features(const synthworld::FrameSequence& seq,
                                  const std::vector<int>& cams) const;
  // same, from pre-converted [3,H,W] tensors indexed t*cams + ci
  FeaturePyramid extract_features_chw(const std::vector<Tensor>& chw, int t_steps,
                                      int cameras) const;

  GeometryCache build_geometry(const synthworld::FrameSequence& seq,
                               const std::vector<int>& cams) const;

  // Visibility-aware weighted aggregation into scene tokens [N, d_q].
  Tensor aggregate(const FeaturePyramid& features, const GeometryCache& geo) const;
  Tensor aggregation_logits(const Tensor& f_all, const GeometryCache& geo) const;

  // Aggregation weights themselves (for the invariant tests): [N, S].
  Tensor aggregation_weights(const FeaturePyramid& features, const GeometryCache& geo) const;

  DecodedScene decode(const Tensor& tokens) const;

 private:
  RecConfig cfg_;
  ParamSet params_;
  std::vector<Vec3> ref_points_;
  Tensor ref_tensor_;

  Param *enc_w1_, *enc_b1_, *enc_w2_, *enc_b2_, *enc_w3_, *enc_b3_, *enc_w4_, *enc_b4_;
  Param *query_emb_, *null_token_;
  // first aggregation layer split by input block: feature, embedding,
  // view direction, scale one-hot
  Param *agg_wf_, *agg_we_, *agg_wd_, *agg_wo_, *agg_b1_, *agg_w2_, *agg_b2_;
  Param *proj_w_, *proj_b_;
  Param *dec_w1_, *dec_b1_, *dec_w2_, *dec_b2_;
};

// L1 pixel term plus lambda times L1 on Sobel responses. `gt_sobel` is the
// precomputed filter response of the ground truth.
Tensor sobel_response(const Tensor& hwc);  // -> [6,H,W]
Tensor reconstruction_loss(const Tensor& rendered_hwc, const Tensor& gt_hwc,
                           const Tensor& gt_sobel, double lambda_grad);

}  // namespace spwm::worldrec

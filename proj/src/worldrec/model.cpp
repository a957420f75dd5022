#include "worldrec/model.hpp"

#include <cmath>

#include "numcore/rng.hpp"

namespace spwm::worldrec {

using namespace numcore;
using synthworld::CameraModel;
using synthworld::FrameSequence;

Tensor image_chw(const Image& img) {
  std::vector<double> data(static_cast<size_t>(3) * img.h * img.w);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < img.h * img.w; ++i)
      data[static_cast<size_t>(c) * img.h * img.w + i] = img.rgb[static_cast<size_t>(i) * 3 + c];
  return Tensor({3, img.h, img.w}, std::move(data));
}

Tensor image_hwc(const Image& img) {
  return Tensor({img.h, img.w, 3}, img.rgb);
}

Image tensor_to_image(const Tensor& hwc) {
  SPWM_CHECK(hwc.ndim() == 3 && hwc.dim(2) == 3, "tensor_to_image expects [H,W,3]");
  Image img(hwc.dim(0), hwc.dim(1));
  img.rgb = hwc.values();
  return img;
}

Vec3 align_temporal(const Vec3& p, int t_from, int t_to,
                    const synthworld::EgoTrajectory& traj) {
  SPWM_CHECK(t_from >= 0 && t_from < traj.length() && t_to >= 0 && t_to < traj.length(),
             "align_temporal: timestep out of range");
  if (t_from == t_to) return p;
  const Vec3 world = traj.poses[static_cast<size_t>(t_from)].apply(p);
  return traj.poses[static_cast<size_t>(t_to)].inverse().apply(world);
}

QueryProjection project_query(const Vec3& p, const CameraModel& cam) {
  QueryProjection out;
  const Vec3 c = cam.to_camera(p);
  if (c.z <= 0.1) return out;
  out.u = cam.fx * c.x / c.z + cam.cx;
  out.v = cam.fy * c.y / c.z + cam.cy;
  out.visible = out.u >= 0 && out.u <= cam.width - 1 && out.v >= 0 && out.v <= cam.height - 1;
  return out;
}

RecModel::RecModel(const RecConfig& cfg, uint64_t seed) : cfg_(cfg) {
  Rng rng(seed, 7);
  const int df = cfg.d_f, dq = cfg.d_q;
  auto winit = [&](const char* name, Shape shape, double fan_in) {
    return params_.add(name, Tensor(shape, rng.normal_vec(numel(shape), 1.0 / std::sqrt(fan_in))));
  };
  enc_w1_ = winit("rec.enc.w1", {df, 3, 3, 3}, 27);
  enc_b1_ = params_.add("rec.enc.b1", Tensor({df}));
  enc_w2_ = winit("rec.enc.w2", {df, df, 3, 3}, 9.0 * df);
  enc_b2_ = params_.add("rec.enc.b2", Tensor({df}));
  enc_w3_ = winit("rec.enc.w3", {df, df, 3, 3}, 9.0 * df);
  enc_b3_ = params_.add("rec.enc.b3", Tensor({df}));
  enc_w4_ = winit("rec.enc.w4", {df, df, 3, 3}, 9.0 * df);
  enc_b4_ = params_.add("rec.enc.b4", Tensor({df}));

  query_emb_ = params_.add("rec.query_emb",
                           Tensor({cfg.n_queries(), dq}, rng.normal_vec(cfg.n_queries() * dq, 0.1)));
  null_token_ = params_.add("rec.null_token", Tensor({dq}, rng.normal_vec(dq, 0.1)));

  const double din = df + dq + 3 + 2;
  agg_wf_ = winit("rec.agg.wf", {df, cfg.agg_hidden}, din);
  agg_we_ = winit("rec.agg.we", {dq, cfg.agg_hidden}, din);
  agg_wd_ = winit("rec.agg.wd", {3, cfg.agg_hidden}, din);
  agg_wo_ = winit("rec.agg.wo", {2, cfg.agg_hidden}, din);
  agg_b1_ = params_.add("rec.agg.b1", Tensor({cfg.agg_hidden}));
  agg_w2_ = winit("rec.agg.w2", {cfg.agg_hidden, 1}, cfg.agg_hidden);
  agg_b2_ = params_.add("rec.agg.b2", Tensor({1}));
  proj_w_ = winit("rec.agg.proj_w", {df, dq}, df);
  proj_b_ = params_.add("rec.agg.proj_b", Tensor({dq}));

  dec_w1_ = winit("rec.dec.w1", {dq, cfg.dec_hidden}, dq);
  dec_b1_ = params_.add("rec.dec.b1", Tensor({cfg.dec_hidden}));
  dec_w2_ = winit("rec.dec.w2", {cfg.dec_hidden, 14}, cfg.dec_hidden);
  {
    // bias init: delta-p and quaternion raw at 0, scale and opacity pulled low
    Tensor b({14});
    auto& v = b.mutable_values();
    for (int k = 7; k < 10; ++k) v[static_cast<size_t>(k)] = cfg.scale_bias;
    v[10] = cfg.alpha_bias;
    dec_b2_ = params_.add("rec.dec.b2", std::move(b));
  }

  // stratified grid over the frustum-union box
  ref_points_.reserve(static_cast<size_t>(cfg.n_queries()));
  std::vector<double> ref_data;
  for (int iz = 0; iz < cfg.grid_z; ++iz)
    for (int iy = 0; iy < cfg.grid_y; ++iy)
      for (int ix = 0; ix < cfg.grid_x; ++ix) {
        const Vec3 p{cfg.qx0 + (ix + 0.5) * (cfg.qx1 - cfg.qx0) / cfg.grid_x,
                     cfg.qy0 + (iy + 0.5) * (cfg.qy1 - cfg.qy0) / cfg.grid_y,
                     cfg.qz0 + (iz + 0.5) * (cfg.qz1 - cfg.qz0) / cfg.grid_z};
        ref_points_.push_back(p);
        ref_data.insert(ref_data.end(), {p.x, p.y, p.z});
      }
  ref_tensor_ = Tensor({cfg.n_queries(), 3}, std::move(ref_data));
}

void RecModel::encode_image(const Tensor& chw, Tensor* s0, Tensor* s1) const {
  Tensor h1 = tanh(conv2d3x3(chw, enc_w1_->leaf, enc_b1_->leaf, 2));
  Tensor h2 = tanh(conv2d3x3(h1, enc_w2_->leaf, enc_b2_->leaf, 1));
  Tensor h3 = tanh(conv2d3x3(h2, enc_w3_->leaf, enc_b3_->leaf, 2));
  Tensor h4 = tanh(conv2d3x3(h3, enc_w4_->leaf, enc_b4_->leaf, 1));
  *s0 = h2;
  *s1 = h4;
}

FeaturePyramid RecModel::extract_features_chw(const std::vector<Tensor>& chw,
                                              int t_steps, int cameras) const {
  FeaturePyramid fp;
  fp.t_steps = t_steps;
  fp.cameras = cameras;
  fp.scale0.resize(chw.size());
  fp.scale1.resize(chw.size());
  for (size_t i = 0; i < chw.size(); ++i)
    encode_image(chw[i], &fp.scale0[i], &fp.scale1[i]);
  return fp;
}

FeaturePyramid RecModel::extract_features(const FrameSequence& seq,
                                          const std::vector<int>& cams) const {
  std::vector<Tensor> chw;
  for (int t = 0; t < seq.t_steps(); ++t)
    for (int c : cams)
      chw.push_back(image_chw(seq.frames[static_cast<size_t>(t)][static_cast<size_t>(c)]));
  return extract_features_chw(chw, seq.t_steps(), static_cast<int>(cams.size()));
}

GeometryCache RecModel::build_geometry(const FrameSequence& seq,
                                       const std::vector<int>& cams) const {
  GeometryCache geo;
  const int n = cfg_.n_queries();
  const int t_steps = seq.t_steps();
  const int n_cams = static_cast<int>(cams.size());
  constexpr int kLevels = 2;
  geo.n = n;
  geo.slots_per_query = t_steps * n_cams * kLevels;
  geo.vis.assign(static_cast<size_t>(n) * geo.slots_per_query, 0);

  for (int t = 0; t < t_steps; ++t) {
    for (int ci = 0; ci < n_cams; ++ci) {
      // rig-frame camera; queries aligned from world (= frame-0 ego) to frame t
      const Pose cam_from_ego = synthworld::rig_camera_pose(seq.spec.rig, cams[static_cast<size_t>(ci)]);
      CameraModel cam;
      cam.fx = seq.spec.rig.fx;
      cam.fy = seq.spec.rig.fy;
      cam.cx = seq.spec.rig.width / 2.0;
      cam.cy = seq.spec.rig.height / 2.0;
      cam.width = seq.spec.rig.width;
      cam.height = seq.spec.rig.height;
      cam.R = cam_from_ego.R;
      cam.tvec = cam_from_ego.t;
      const Vec3 cam_center_ego = cam_from_ego.inverse().t;

      std::vector<int> q_idx;
      std::vector<double> base_uv, dirs;
      for (int i = 0; i < n; ++i) {
        const Vec3 p_ego = align_temporal(ref_points_[static_cast<size_t>(i)], 0, t, seq.trajectory);
        const QueryProjection pr = project_query(p_ego, cam);
        if (!pr.visible) continue;
        q_idx.push_back(i);
        base_uv.insert(base_uv.end(), {pr.u, pr.v});
        const Vec3 d = (p_ego - cam_center_ego).normalized();
        dirs.insert(dirs.end(), {d.x, d.y, d.z});
      }
      for (int level = 0; level < kLevels; ++level) {
        GeometryCache::Slot slot;
        slot.t = t;
        slot.c = ci;
        slot.level = level;
        slot.q_idx = q_idx;
        slot.dirs = dirs;
        const double ds = level == 0 ? 2.0 : 4.0;
        slot.uv.reserve(base_uv.size());
        for (size_t k = 0; k < base_uv.size(); ++k) slot.uv.push_back(base_uv[k] / ds);
        const int s = (t * n_cams + ci) * kLevels + level;
        for (int qi : slot.q_idx) {
          geo.vis[static_cast<size_t>(qi) * geo.slots_per_query + s] = 1;
          geo.scatter_idx.push_back(qi * geo.slots_per_query + s);
        }
        geo.slots.push_back(std::move(slot));
      }
    }
  }
  std::vector<double> dirs_flat;
  for (const auto& slot : geo.slots) {
    dirs_flat.insert(dirs_flat.end(), slot.dirs.begin(), slot.dirs.end());
    geo.qidx_all.insert(geo.qidx_all.end(), slot.q_idx.begin(), slot.q_idx.end());
    for (size_t k = 0; k < slot.q_idx.size(); ++k) geo.level_all.push_back(slot.level);
  }
  geo.dirs_all = Tensor({static_cast<int>(geo.qidx_all.size()), 3}, std::move(dirs_flat));
  return geo;
}

namespace {

// Sampled features for every visible sample, in slot order: [M, d_f].
Tensor gather_features(const FeaturePyramid& features, const GeometryCache& geo) {
  std::vector<Tensor> blocks;
  for (const auto& slot : geo.slots) {
    if (slot.q_idx.empty()) continue;
    blocks.push_back(bilinear_sample(features.at(slot.t, slot.c, slot.level), slot.uv));
  }
  SPWM_CHECK(!blocks.empty(), "aggregate: no visible samples in any slot");
  return concat_rows(blocks);
}

}  // namespace

// First aggregation layer applied blockwise: feature, query embedding,
// view direction and scale one-hot terms are projected separately and
// summed, which avoids materializing the concatenated MLP input.
Tensor RecModel::aggregation_logits(const Tensor& f_all, const GeometryCache& geo) const {
  Tensor emb_proj = matmul(query_emb_->leaf, agg_we_->leaf);  // [N, hidden]
  Tensor h = matmul(f_all, agg_wf_->leaf);
  h = add(h, gather_rows(emb_proj, geo.qidx_all));
  h = add(h, matmul(geo.dirs_all, agg_wd_->leaf));
  h = add(h, gather_rows(agg_wo_->leaf, geo.level_all));
  h = tanh(add_rowvec(h, agg_b1_->leaf));
  return add_rowvec(matmul(h, agg_w2_->leaf), agg_b2_->leaf);  // [M,1]
}

Tensor RecModel::aggregation_weights(const FeaturePyramid& features,
                                     const GeometryCache& geo) const {
  Tensor f_all = gather_features(features, geo);
  Tensor logits = aggregation_logits(f_all, geo);
  Tensor dense = scatter_rows(geo.n * geo.slots_per_query, geo.scatter_idx, logits);
  return masked_softmax(reshape(dense, {geo.n, geo.slots_per_query}), geo.vis);
}

Tensor RecModel::aggregate(const FeaturePyramid& features, const GeometryCache& geo) const {
  Tensor f_all = gather_features(features, geo);
  Tensor logits = aggregation_logits(f_all, geo);
  Tensor weights = masked_softmax(
      reshape(scatter_rows(geo.n * geo.slots_per_query, geo.scatter_idx, logits),
              {geo.n, geo.slots_per_query}),
      geo.vis);
  Tensor dense_f = scatter_rows(geo.n * geo.slots_per_query, geo.scatter_idx, f_all);
  Tensor pooled = weighted_sum(weights, dense_f);  // [N, d_f]
  Tensor tokens = add_rowvec(matmul(pooled, proj_w_->leaf), proj_b_->leaf);

  // queries with no visible sample take the learned null token
  std::vector<double> vis_any(static_cast<size_t>(geo.n) * cfg_.d_q, 0.0);
  std::vector<double> inv_any(static_cast<size_t>(geo.n) * cfg_.d_q, 0.0);
  std::vector<double> ones(static_cast<size_t>(geo.n), 1.0);
  bool any_null = false;
  for (int i = 0; i < geo.n; ++i) {
    bool any = false;
    for (int s = 0; s < geo.slots_per_query; ++s)
      any |= geo.vis[static_cast<size_t>(i) * geo.slots_per_query + s] != 0;
    for (int k = 0; k < cfg_.d_q; ++k)
      (any ? vis_any : inv_any)[static_cast<size_t>(i) * cfg_.d_q + k] = 1.0;
    any_null |= !any;
  }
  if (!any_null) return tokens;
  Tensor null_rows = matmul(Tensor({geo.n, 1}, ones), reshape(null_token_->leaf, {1, cfg_.d_q}));
  return add(mul(tokens, Tensor({geo.n, cfg_.d_q}, vis_any)),
             mul(null_rows, Tensor({geo.n, cfg_.d_q}, inv_any)));
}

DecodedScene RecModel::decode(const Tensor& tokens) const {
  const int n = tokens.dim(0);
  Tensor h = tanh(add_rowvec(matmul(tokens, dec_w1_->leaf), dec_b1_->leaf));
  Tensor raw = add_rowvec(matmul(h, dec_w2_->leaf), dec_b2_->leaf);  // [N,14]

  DecodedScene out;
  Tensor dp = scale(tanh(slice_cols(raw, 0, 3)), cfg_.delta_max);
  out.centers = add(dp, ref_tensor_);
  out.quats = l2_normalize_rows(add_rowvec(slice_cols(raw, 3, 4), Tensor({4}, {1, 0, 0, 0})));
  out.scales = add_const(softplus(slice_cols(raw, 7, 3)), cfg_.s_min);
  out.opacities = reshape(sigmoid(slice_cols(raw, 10, 1)), {n});
  out.colors = sigmoid(slice_cols(raw, 11, 3));
  out.tokens = tokens;
  return out;
}

std::vector<synthworld::GaussianPrimitive> DecodedScene::primitives() const {
  const int n = centers.dim(0);
  std::vector<synthworld::GaussianPrimitive> prims(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& g = prims[static_cast<size_t>(i)];
    g.center = {centers.data()[i * 3], centers.data()[i * 3 + 1], centers.data()[i * 3 + 2]};
    g.qw = quats.data()[i * 4];
    g.qx = quats.data()[i * 4 + 1];
    g.qy = quats.data()[i * 4 + 2];
    g.qz = quats.data()[i * 4 + 3];
    g.scale = {scales.data()[i * 3], scales.data()[i * 3 + 1], scales.data()[i * 3 + 2]};
    g.opacity = opacities.data()[i];
    g.color = {colors.data()[i * 3], colors.data()[i * 3 + 1], colors.data()[i * 3 + 2]};
  }
  return prims;
}

namespace {

Tensor sobel_weights() {
  // per-channel Gx and Gy pairs: out channel 2c   = Gx on channel c,
  //                              out channel 2c+1 = Gy on channel c
  Tensor w({6, 3, 3, 3});
  auto& v = w.mutable_values();
  const double gx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
  const double gy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 9; ++k) {
      v[((static_cast<size_t>(2 * c) * 3) + c) * 9 + k] = gx[k];
      v[((static_cast<size_t>(2 * c + 1) * 3) + c) * 9 + k] = gy[k];
    }
  return w;
}

const Tensor& cached_sobel_weights() {
  static const Tensor w = sobel_weights();
  return w;
}

std::vector<int> hwc_to_chw_index(int h, int w) {
  std::vector<int> idx(static_cast<size_t>(3) * h * w);
  size_t k = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) idx[k++] = (y * w + x) * 3 + c;
  return idx;
}

}  // namespace

Tensor sobel_response(const Tensor& hwc) {
  SPWM_CHECK(hwc.ndim() == 3 && hwc.dim(2) == 3, "sobel_response expects [H,W,3]");
  const int h = hwc.dim(0), w = hwc.dim(1);
  Tensor flat = reshape(hwc, {h * w * 3});
  Tensor chw = reshape(gather_rows(flat, hwc_to_chw_index(h, w)), {3, h, w});
  return conv2d3x3(chw, cached_sobel_weights(), Tensor({6}), 1);
}

Tensor reconstruction_loss(const Tensor& rendered_hwc, const Tensor& gt_hwc,
                           const Tensor& gt_sobel, double lambda_grad) {
  SPWM_CHECK(rendered_hwc.shape() == gt_hwc.shape(),
             "reconstruction_loss: rendered shape ", numcore::shape_str(rendered_hwc.shape()),
             " vs ground truth ", numcore::shape_str(gt_hwc.shape()));
  Tensor pixel = l1_loss(rendered_hwc, gt_hwc);
  if (lambda_grad == 0.0) return pixel;
  Tensor grad_term = l1_loss(sobel_response(rendered_hwc), gt_sobel);
  return add(pixel, scale(grad_term, lambda_grad));
}

}  // namespace spwm::worldrec

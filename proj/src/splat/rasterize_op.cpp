#include "splat/rasterize_op.hpp"

#include <cmath>
#include <memory>

#include "numcore/adscalar.hpp"
#include "numcore/parallel.hpp"

namespace spwm::splat {

using numcore::Tape;
using numcore::Tensor;

namespace {

struct ForwardCache {
  std::vector<TSplat<double>> splats;
  TileBins bins;
};

// Per-splat gradient accumulator in screen space: d(mean), d(cov2d inverse as
// a full symmetric 2x2: p00, p01-cell, p11), d(alpha), d(color).
struct ScreenGrad {
  double mean[2] = {0, 0};
  double pfull[3] = {0, 0, 0};
  double alpha = 0;
  double color[3] = {0, 0, 0};
};

struct Contribution {
  int local;      // index into the tile list
  double a;       // clamped alpha'
  double g;       // exp(power)
  double t_before;
};

// Backward of one splat's projection: screen-space gradients to attribute
// gradients. Recomputes the forward intermediates from the raw attributes.
void projection_backward(const double* center, const double* quat,
                         const double* scl, const CameraModel& cam,
                         const SplatConfig& cfg, const ScreenGrad& sg,
                         double* d_center, double* d_quat, double* d_scale) {
  const Mat3& R = cam.R;
  const double px = center[0], py = center[1], pz = center[2];
  const double mx = R(0, 0) * px + R(0, 1) * py + R(0, 2) * pz + cam.tvec.x;
  const double my = R(1, 0) * px + R(1, 1) * py + R(1, 2) * pz + cam.tvec.y;
  const double mz = R(2, 0) * px + R(2, 1) * py + R(2, 2) * pz + cam.tvec.z;

  const double qn = std::sqrt(quat[0] * quat[0] + quat[1] * quat[1] +
                              quat[2] * quat[2] + quat[3] * quat[3]);
  const double w = quat[0] / qn, x = quat[1] / qn, y = quat[2] / qn, z = quat[3] / qn;
  const double Rq[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
  double M[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M[i * 3 + j] = Rq[i * 3 + j] * scl[j];
  double Sig[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      Sig[i * 3 + j] = M[i * 3] * M[j * 3] + M[i * 3 + 1] * M[j * 3 + 1] + M[i * 3 + 2] * M[j * 3 + 2];
  double RS[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      RS[i * 3 + j] = R(i, 0) * Sig[j] + R(i, 1) * Sig[3 + j] + R(i, 2) * Sig[6 + j];
  double Sc[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      Sc[i * 3 + j] = RS[i * 3] * R(j, 0) + RS[i * 3 + 1] * R(j, 1) + RS[i * 3 + 2] * R(j, 2);

  const double inv_z = 1.0 / mz;
  const double j00 = cam.fx * inv_z, j02 = -cam.fx * mx * inv_z * inv_z;
  const double j11 = cam.fy * inv_z, j12 = -cam.fy * my * inv_z * inv_z;

  const double c00 = j00 * (j00 * Sc[0] + j02 * Sc[6]) + j02 * (j00 * Sc[2] + j02 * Sc[8]) + cfg.cov_reg;
  const double c01 = j11 * (j00 * Sc[1] + j02 * Sc[7]) + j12 * (j00 * Sc[2] + j02 * Sc[8]);
  const double c11 = j11 * (j11 * Sc[4] + j12 * Sc[7]) + j12 * (j11 * Sc[5] + j12 * Sc[8]) + cfg.cov_reg;
  const double det = c00 * c11 - c01 * c01;
  const double p00 = c11 / det, p01 = -c01 / det, p11 = c00 / det;

  // dC = -P dP P (all as full 2x2, both symmetric)
  const double dp00 = sg.pfull[0], dp01 = sg.pfull[1], dp11 = sg.pfull[2];
  const double t00 = p00 * dp00 + p01 * dp01, t01 = p00 * dp01 + p01 * dp11;
  const double t10 = p01 * dp00 + p11 * dp01, t11 = p01 * dp01 + p11 * dp11;
  const double dc00 = -(t00 * p00 + t01 * p01);
  const double dc01c = -(t00 * p01 + t01 * p11);  // [0][1] cell
  const double dc10c = -(t10 * p00 + t11 * p01);  // [1][0] cell
  const double dc11 = -(t10 * p01 + t11 * p11);

  // J rows: [j00 0 j02], [0 j11 j12]; dJ = dC J Sc^T + dC^T J Sc
  const double jr0[3] = {j00, 0, j02}, jr1[3] = {0, j11, j12};
  double jsc0[3], jsc1[3];  // rows of J * Sc (Sc symmetric)
  for (int k = 0; k < 3; ++k) {
    jsc0[k] = jr0[0] * Sc[k] + jr0[1] * Sc[3 + k] + jr0[2] * Sc[6 + k];
    jsc1[k] = jr1[0] * Sc[k] + jr1[1] * Sc[3 + k] + jr1[2] * Sc[6 + k];
  }
  double dJ[6];
  for (int k = 0; k < 3; ++k) {
    dJ[k] = dc00 * jsc0[k] + dc01c * jsc1[k] + dc00 * jsc0[k] + dc10c * jsc1[k];
    dJ[3 + k] = dc10c * jsc0[k] + dc11 * jsc1[k] + dc01c * jsc0[k] + dc11 * jsc1[k];
  }
  // dSc = J^T dC J
  double dSc[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      dSc[i * 3 + j] = jr0[i] * (dc00 * jr0[j] + dc01c * jr1[j]) +
                       jr1[i] * (dc10c * jr0[j] + dc11 * jr1[j]);
  // dSig = R^T dSc R
  double dRS[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      dRS[i * 3 + j] = R(0, i) * dSc[j] + R(1, i) * dSc[3 + j] + R(2, i) * dSc[6 + j];
  double dSig[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      dSig[i * 3 + j] = dRS[i * 3] * R(0, j) + dRS[i * 3 + 1] * R(1, j) + dRS[i * 3 + 2] * R(2, j);
  // dM = (dSig + dSig^T) M
  double dM[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += (dSig[i * 3 + k] + dSig[k * 3 + i]) * M[k * 3 + j];
      dM[i * 3 + j] = s;
    }
  // M = Rq diag(s)
  double dRq[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) dRq[i * 3 + j] = dM[i * 3 + j] * scl[j];
  for (int j = 0; j < 3; ++j) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += dM[i * 3 + j] * Rq[i * 3 + j];
    d_scale[j] += s;
  }
  // quaternion partials of R(q_hat)
  double dw = dRq[1] * (-2 * z) + dRq[2] * (2 * y) + dRq[3] * (2 * z) + dRq[5] * (-2 * x) +
              dRq[6] * (-2 * y) + dRq[7] * (2 * x);
  double dx = dRq[1] * (2 * y) + dRq[2] * (2 * z) + dRq[3] * (2 * y) + dRq[4] * (-4 * x) +
              dRq[5] * (-2 * w) + dRq[6] * (2 * z) + dRq[7] * (2 * w) + dRq[8] * (-4 * x);
  double dy = dRq[0] * (-4 * y) + dRq[1] * (2 * x) + dRq[2] * (2 * w) + dRq[3] * (2 * x) +
              dRq[5] * (2 * z) + dRq[6] * (-2 * w) + dRq[7] * (2 * z) + dRq[8] * (-4 * y);
  double dz = dRq[0] * (-4 * z) + dRq[1] * (-2 * w) + dRq[2] * (2 * x) + dRq[3] * (2 * w) +
              dRq[4] * (-4 * z) + dRq[5] * (2 * y) + dRq[6] * (2 * x) + dRq[7] * (2 * y);
  // through normalization
  const double dot = w * dw + x * dx + y * dy + z * dz;
  d_quat[0] += (dw - w * dot) / qn;
  d_quat[1] += (dx - x * dot) / qn;
  d_quat[2] += (dy - y * dot) / qn;
  d_quat[3] += (dz - z * dot) / qn;

  // mean path: screen mean and Jacobian both depend on m
  double dmx = sg.mean[0] * j00;
  double dmy = sg.mean[1] * j11;
  double dmz = sg.mean[0] * j02 + sg.mean[1] * j12;
  dmx += dJ[2] * (-cam.fx * inv_z * inv_z);
  dmy += dJ[5] * (-cam.fy * inv_z * inv_z);
  dmz += dJ[0] * (-cam.fx * inv_z * inv_z) + dJ[2] * (2 * cam.fx * mx * inv_z * inv_z * inv_z) +
         dJ[4] * (-cam.fy * inv_z * inv_z) + dJ[5] * (2 * cam.fy * my * inv_z * inv_z * inv_z);
  d_center[0] += R(0, 0) * dmx + R(1, 0) * dmy + R(2, 0) * dmz;
  d_center[1] += R(0, 1) * dmx + R(1, 1) * dmy + R(2, 1) * dmz;
  d_center[2] += R(0, 2) * dmx + R(1, 2) * dmy + R(2, 2) * dmz;
}

}  // namespace

Tensor rasterize_op(const Tensor& centers, const Tensor& quats,
                    const Tensor& scales, const Tensor& opacities,
                    const Tensor& colors, const CameraModel& cam,
                    const SplatConfig& cfg) {
  const int n = centers.ndim() > 0 ? centers.dim(0) : 0;
  SPWM_CHECK(centers.ndim() == 2 && centers.dim(1) == 3, "rasterize: centers must be [N,3]");
  SPWM_CHECK(quats.ndim() == 2 && quats.dim(0) == n && quats.dim(1) == 4,
             "rasterize: quats must be [N,4]");
  SPWM_CHECK(scales.ndim() == 2 && scales.dim(0) == n && scales.dim(1) == 3,
             "rasterize: scales must be [N,3]");
  SPWM_CHECK(static_cast<int>(opacities.size()) == n, "rasterize: opacities must be [N]");
  SPWM_CHECK(colors.ndim() == 2 && colors.dim(0) == n && colors.dim(1) == 3,
             "rasterize: colors must be [N,3]");
  SPWM_CHECK(cfg.cutoffs, "rasterize_op requires cutoffs enabled");

  PrimArrays prims{centers.data(), quats.data(), scales.data(),
                   opacities.data(), colors.data(), n};
  auto cache = std::make_shared<ForwardCache>();
  cache->splats = project_all(prims, cam, cfg);
  cache->bins = bin_tiles(cache->splats, cam, cfg);

  const int h = cam.height, w = cam.width;
  std::vector<double> out(static_cast<size_t>(h) * w * 4, 0.0);
  const int n_tiles = cache->bins.tiles_x * cache->bins.tiles_y;
  numcore::parallel_for(n_tiles, [&](int64_t t0, int64_t t1) {
    std::vector<const TSplat<double>*> ptrs;
    for (int64_t t = t0; t < t1; ++t) {
      const int tx = static_cast<int>(t) % cache->bins.tiles_x;
      const int ty = static_cast<int>(t) / cache->bins.tiles_x;
      ptrs.clear();
      for (int idx : cache->bins.lists[static_cast<size_t>(t)])
        ptrs.push_back(&cache->splats[static_cast<size_t>(idx)]);
      const int px0 = tx * cfg.tile, py0 = ty * cfg.tile;
      const int px1 = std::min(px0 + cfg.tile, w), py1 = std::min(py0 + cfg.tile, h);
      for (int py = py0; py < py1; ++py)
        for (int px = px0; px < px1; ++px) {
          double pix[4];
          composite_pixel<double>(px, py, ptrs.begin(), ptrs.end(), cfg, pix);
          double* o = out.data() + (static_cast<size_t>(py) * w + px) * 4;
          for (int c = 0; c < 4; ++c) o[c] = pix[c];
        }
    }
  });
  Tensor result({h, w, 4}, std::move(out));

  Tape* tape = Tape::current();
  const bool tc = numcore::tracked(centers), tq = numcore::tracked(quats),
             ts = numcore::tracked(scales), to = numcore::tracked(opacities),
             tcol = numcore::tracked(colors);
  if (!tape || (!tc && !tq && !ts && !to && !tcol)) return result;

  const int nc = centers.node(), nq = quats.node(), ns = scales.node(),
            no = opacities.node(), ncol = colors.node();
  return result.with_node(
      tape->record(
          {tc ? nc : -1, tq ? nq : -1, ts ? ns : -1, to ? no : -1, tcol ? ncol : -1},
          [=](const std::vector<double>& g, Tape& tp) {
            // Phase 1: per tile, composite credits into tile-local buffers.
            const auto& splats = cache->splats;
            const auto& bins = cache->bins;
            std::vector<ScreenGrad> global(static_cast<size_t>(n));
            const int tiles = bins.tiles_x * bins.tiles_y;
            std::vector<std::vector<ScreenGrad>> local(static_cast<size_t>(tiles));
            const double cut = -0.5 * cfg.sigma_cut * cfg.sigma_cut;
            numcore::parallel_for(tiles, [&](int64_t t0, int64_t t1) {
              std::vector<Contribution> stack;
              for (int64_t t = t0; t < t1; ++t) {
                const auto& list = bins.lists[static_cast<size_t>(t)];
                auto& acc = local[static_cast<size_t>(t)];
                acc.assign(list.size(), ScreenGrad{});
                if (list.empty()) continue;
                const int tx = static_cast<int>(t) % bins.tiles_x;
                const int ty = static_cast<int>(t) / bins.tiles_x;
                const int px0 = tx * cfg.tile, py0 = ty * cfg.tile;
                const int px1 = std::min(px0 + cfg.tile, w), py1 = std::min(py0 + cfg.tile, h);
                for (int py = py0; py < py1; ++py)
                  for (int px = px0; px < px1; ++px) {
                    const double* gp = g.data() + (static_cast<size_t>(py) * w + px) * 4;
                    if (gp[0] == 0 && gp[1] == 0 && gp[2] == 0 && gp[3] == 0) continue;
                    // forward replay
                    stack.clear();
                    double tr = 1.0;
                    for (size_t li = 0; li < list.size(); ++li) {
                      const auto& sp = splats[static_cast<size_t>(list[li])];
                      const double dx = px - sp.mean[0], dy = py - sp.mean[1];
                      const double power = -0.5 * (sp.conic[0] * dx * dx +
                                                   2 * sp.conic[1] * dx * dy +
                                                   sp.conic[2] * dy * dy);
                      if (power > 0 || power < cut) continue;
                      const double gexp = std::exp(power);
                      const double a = std::min(sp.alpha * gexp, cfg.alpha_clamp);
                      if (a < cfg.alpha_min) continue;
                      stack.push_back({static_cast<int>(li), a, gexp, tr});
                      tr *= 1.0 - a;
                    }
                    const double t_final = tr;
                    // reverse sweep: suffix color includes the background
                    double suffix[3] = {cfg.background.x * t_final,
                                        cfg.background.y * t_final,
                                        cfg.background.z * t_final};
                    for (size_t si = stack.size(); si-- > 0;) {
                      const Contribution& cb = stack[si];
                      const auto& sp = splats[static_cast<size_t>(list[static_cast<size_t>(cb.local)])];
                      ScreenGrad& sg = acc[static_cast<size_t>(cb.local)];
                      const double om = 1.0 - cb.a;
                      double da = -gp[3] * t_final / om;
                      for (int c = 0; c < 3; ++c) {
                        da += gp[c] * (sp.color[c] * cb.t_before - suffix[c] / om);
                        sg.color[c] += gp[c] * cb.a * cb.t_before;
                        suffix[c] += sp.color[c] * cb.a * cb.t_before;
                      }
                      if (sp.alpha * cb.g < cfg.alpha_clamp) {
                        sg.alpha += cb.g * da;
                        const double dpower = sp.alpha * cb.g * da;
                        const double dx = px - sp.mean[0], dy = py - sp.mean[1];
                        sg.mean[0] += dpower * (sp.conic[0] * dx + sp.conic[1] * dy);
                        sg.mean[1] += dpower * (sp.conic[1] * dx + sp.conic[2] * dy);
                        sg.pfull[0] += -0.5 * dx * dx * dpower;
                        sg.pfull[1] += -0.5 * dx * dy * dpower;
                        sg.pfull[2] += -0.5 * dy * dy * dpower;
                      }
                    }
                  }
              }
            });
            // Phase 2: merge in fixed tile order.
            for (int t = 0; t < tiles; ++t) {
              const auto& list = bins.lists[static_cast<size_t>(t)];
              for (size_t li = 0; li < list.size(); ++li) {
                const ScreenGrad& s = local[static_cast<size_t>(t)][li];
                ScreenGrad& d = global[static_cast<size_t>(list[li])];
                d.mean[0] += s.mean[0];
                d.mean[1] += s.mean[1];
                for (int k = 0; k < 3; ++k) d.pfull[k] += s.pfull[k];
                d.alpha += s.alpha;
                for (int k = 0; k < 3; ++k) d.color[k] += s.color[k];
              }
            }
            // Phase 3: projection backward per splat.
            std::vector<double>* gc = tc ? &tp.grad_buf(nc, centers.size()) : nullptr;
            std::vector<double>* gq = tq ? &tp.grad_buf(nq, quats.size()) : nullptr;
            std::vector<double>* gs = ts ? &tp.grad_buf(ns, scales.size()) : nullptr;
            std::vector<double>* go = to ? &tp.grad_buf(no, opacities.size()) : nullptr;
            std::vector<double>* gcol = tcol ? &tp.grad_buf(ncol, colors.size()) : nullptr;
            numcore::parallel_for(n, [&](int64_t i0, int64_t i1) {
              for (int64_t i = i0; i < i1; ++i) {
                if (splats[static_cast<size_t>(i)].culled) continue;
                const ScreenGrad& sg = global[static_cast<size_t>(i)];
                if (go) (*go)[static_cast<size_t>(i)] += sg.alpha;
                if (gcol)
                  for (int k = 0; k < 3; ++k) (*gcol)[static_cast<size_t>(i) * 3 + k] += sg.color[k];
                if (gc || gq || gs) {
                  double dcen[3] = {0, 0, 0}, dq[4] = {0, 0, 0, 0}, dsc[3] = {0, 0, 0};
                  projection_backward(centers.data() + i * 3, quats.data() + i * 4,
                                      scales.data() + i * 3, cam, cfg, sg, dcen, dq, dsc);
                  if (gc)
                    for (int k = 0; k < 3; ++k) (*gc)[static_cast<size_t>(i) * 3 + k] += dcen[k];
                  if (gq)
                    for (int k = 0; k < 4; ++k) (*gq)[static_cast<size_t>(i) * 4 + k] += dq[k];
                  if (gs)
                    for (int k = 0; k < 3; ++k) (*gs)[static_cast<size_t>(i) * 3 + k] += dsc[k];
                }
              }
            });
          }),
      tape);
}

Tensor rasterize_reference_ad(const Tensor& centers, const Tensor& quats,
                              const Tensor& scales, const Tensor& opacities,
                              const Tensor& colors, const CameraModel& cam,
                              const SplatConfig& cfg) {
  using numcore::AScalar;
  const int n = centers.dim(0);
  std::vector<Tensor> flat = {
      reshape(centers, {n * 3}), reshape(quats, {n * 4}), reshape(scales, {n * 3}),
      reshape(opacities, {n}), reshape(colors, {n * 3})};
  auto at = [&](int which, int idx) {
    return AScalar(slice_rows(flat[static_cast<size_t>(which)], idx, 1));
  };
  std::vector<TSplat<AScalar>> splats;
  for (int i = 0; i < n; ++i) {
    TGauss<AScalar> g;
    for (int k = 0; k < 3; ++k) g.p[k] = at(0, i * 3 + k);
    for (int k = 0; k < 4; ++k) g.q[k] = at(1, i * 4 + k);
    for (int k = 0; k < 3; ++k) g.s[k] = at(2, i * 3 + k);
    g.alpha = at(3, i);
    for (int k = 0; k < 3; ++k) g.color[k] = at(4, i * 3 + k);
    splats.push_back(project_gaussian_t(g, cam, cfg, i));
  }
  std::vector<const TSplat<AScalar>*> ptrs;
  for (const auto& sp : splats)
    if (!sp.culled) ptrs.push_back(&sp);
  std::sort(ptrs.begin(), ptrs.end(), [](const TSplat<AScalar>* a, const TSplat<AScalar>* b) {
    if (a->depth != b->depth) return a->depth < b->depth;
    return a->source_index < b->source_index;
  });
  std::vector<Tensor> pixels;
  pixels.reserve(static_cast<size_t>(cam.height) * cam.width * 4);
  for (int py = 0; py < cam.height; ++py)
    for (int px = 0; px < cam.width; ++px) {
      AScalar pix[4];
      composite_pixel<AScalar>(px, py, ptrs.begin(), ptrs.end(), cfg, pix);
      for (int c = 0; c < 4; ++c) pixels.push_back(pix[c].t);
    }
  return reshape(concat_rows(pixels), {cam.height, cam.width, 4});
}

}  // namespace spwm::splat

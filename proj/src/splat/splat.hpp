#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "common/geom.hpp"
#include "common/image.hpp"
#include "synthworld/types.hpp"

namespace spwm::splat {

using synthworld::CameraModel;
using synthworld::GaussianPrimitive;

struct SplatConfig {
  double cov_reg = 0.3;           // screen-space covariance dilation, +reg*I
  double alpha_clamp = 0.99;      // per-contribution opacity ceiling
  double alpha_min = 1.0 / 255.0; // contributions below this are skipped
  double near_plane = 0.1;        // meters; closer splats are culled
  double sigma_cut = 3.0;         // ellipse extent for culling and skipping
  int tile = 16;                  // tile edge in pixels
  bool cutoffs = true;            // disable for oracle semantics (--no-cutoff)
  Vec3 background{0, 0, 0};
};

// double overloads for the scalar-generic code below; the autodiff scalar
// provides its own via ADL.
inline double scalar_value(double v) { return v; }
inline double min_const(double a, double c) { return a < c ? a : c; }

// A projected splat. Scalar type S is double in production; the test suites
// instantiate it with an autodiff scalar to differentiate the reference path.
// Culling and skip decisions are always made on plain values so both
// instantiations take identical branches.
template <typename S>
struct TSplat {
  bool culled = true;
  S mean[2];
  S cov[3];    // (c00, c01, c11), regularized
  S conic[3];  // inverse covariance (p00, p01, p11)
  S alpha;
  S color[3];
  double depth = 0;  // camera-space z, sorting key
  int source_index = -1;
  double radius = 0;  // sigma_cut * sqrt(max eigenvalue)
};

template <typename S>
struct TGauss {
  S p[3];
  S q[4];
  S s[3];
  S alpha;
  S color[3];
};

// EWA-style projection: Sigma = R diag(s^2) R^T, camera-space mean, pinhole
// Jacobian at the mean, cov2d = J Sigma_cam J^T + reg*I. Culled when the
// depth is behind the near plane or the sigma_cut ellipse misses the image.
template <typename S>
TSplat<S> project_gaussian_t(const TGauss<S>& g, const CameraModel& cam,
                             const SplatConfig& cfg, int source_index) {
  using std::sqrt;
  TSplat<S> out;
  out.source_index = source_index;

  // camera-space mean (camera is constant; only g carries gradients)
  const Mat3& R = cam.R;
  S mx = S(R(0, 0)) * g.p[0] + S(R(0, 1)) * g.p[1] + S(R(0, 2)) * g.p[2] + S(cam.tvec.x);
  S my = S(R(1, 0)) * g.p[0] + S(R(1, 1)) * g.p[1] + S(R(1, 2)) * g.p[2] + S(cam.tvec.y);
  S mz = S(R(2, 0)) * g.p[0] + S(R(2, 1)) * g.p[1] + S(R(2, 2)) * g.p[2] + S(cam.tvec.z);
  const double z = scalar_value(mz);
  if (z <= cfg.near_plane) return out;  // culled
  out.depth = z;

  S u = S(cam.fx) * mx / mz + S(cam.cx);
  S v = S(cam.fy) * my / mz + S(cam.cy);

  // normalized quaternion to rotation matrix
  S qn = sqrt(g.q[0] * g.q[0] + g.q[1] * g.q[1] + g.q[2] * g.q[2] + g.q[3] * g.q[3]);
  S w = g.q[0] / qn, x = g.q[1] / qn, y = g.q[2] / qn, zq = g.q[3] / qn;
  S Rq[9] = {S(1) - S(2) * (y * y + zq * zq), S(2) * (x * y - w * zq), S(2) * (x * zq + w * y),
             S(2) * (x * y + w * zq), S(1) - S(2) * (x * x + zq * zq), S(2) * (y * zq - w * x),
             S(2) * (x * zq - w * y), S(2) * (y * zq + w * x), S(1) - S(2) * (x * x + y * y)};

  // Sigma = M M^T with M = Rq diag(s)
  S M[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M[i * 3 + j] = Rq[i * 3 + j] * g.s[j];
  S Sig[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      Sig[i * 3 + j] = M[i * 3] * M[j * 3] + M[i * 3 + 1] * M[j * 3 + 1] + M[i * 3 + 2] * M[j * 3 + 2];

  // Sigma_cam = R Sigma R^T
  S RS[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      RS[i * 3 + j] = S(R(i, 0)) * Sig[j] + S(R(i, 1)) * Sig[3 + j] + S(R(i, 2)) * Sig[6 + j];
  S Sc[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      Sc[i * 3 + j] = RS[i * 3] * S(R(j, 0)) + RS[i * 3 + 1] * S(R(j, 1)) + RS[i * 3 + 2] * S(R(j, 2));

  // pinhole Jacobian at the mean
  S inv_z = S(1) / mz;
  S j00 = S(cam.fx) * inv_z, j02 = S(-cam.fx) * mx * inv_z * inv_z;
  S j11 = S(cam.fy) * inv_z, j12 = S(-cam.fy) * my * inv_z * inv_z;

  // cov2d = J Sigma_cam J^T + reg I  (J rows: [j00 0 j02], [0 j11 j12])
  S a0 = j00 * Sc[0] + j02 * Sc[6];
  S a1 = j00 * Sc[1] + j02 * Sc[7];
  S a2 = j00 * Sc[2] + j02 * Sc[8];
  S b0 = j11 * Sc[3] + j12 * Sc[6];
  S b1 = j11 * Sc[4] + j12 * Sc[7];
  S b2 = j11 * Sc[5] + j12 * Sc[8];
  S c00 = a0 * j00 + a2 * j02 + S(cfg.cov_reg);
  S c01 = a1 * j11 + a2 * j12;
  S c11 = b1 * j11 + b2 * j12 + S(cfg.cov_reg);

  // cull if the sigma_cut ellipse misses the image (value-based decision)
  const double vc00 = scalar_value(c00), vc01 = scalar_value(c01), vc11 = scalar_value(c11);
  const double mid = 0.5 * (vc00 + vc11);
  const double disc = std::sqrt(std::max(0.0, mid * mid - (vc00 * vc11 - vc01 * vc01)));
  const double lam_max = mid + disc;
  const double radius = cfg.sigma_cut * std::sqrt(std::max(0.0, lam_max));
  const double uu = scalar_value(u), vv = scalar_value(v);
  if (uu + radius < 0 || uu - radius > cam.width - 1 || vv + radius < 0 ||
      vv - radius > cam.height - 1)
    return out;  // culled

  S det = c00 * c11 - c01 * c01;
  out.culled = false;
  out.mean[0] = u;
  out.mean[1] = v;
  out.cov[0] = c00;
  out.cov[1] = c01;
  out.cov[2] = c11;
  out.conic[0] = c11 / det;
  out.conic[1] = S(0) - c01 / det;
  out.conic[2] = c00 / det;
  out.alpha = g.alpha;
  out.color[0] = g.color[0];
  out.color[1] = g.color[1];
  out.color[2] = g.color[2];
  out.radius = radius;
  return out;
}

// Front-to-back alpha compositing of one pixel over a depth-sorted splat
// list. out[0..2] = rgb, out[3] = final transmittance. The accumulation
// order is fixed by the sorted list, so any two callers that present the
// same list produce bit-identical results.
template <typename S, typename SplatPtrIter>
void composite_pixel(double px, double py, SplatPtrIter begin, SplatPtrIter end,
                     const SplatConfig& cfg, S out[4]) {
  const double cut = -0.5 * cfg.sigma_cut * cfg.sigma_cut;
  S rgb[3] = {S(0), S(0), S(0)};
  S tr = S(1);
  for (auto it = begin; it != end; ++it) {
    const TSplat<S>& sp = **it;
    S dx = S(px) - sp.mean[0];
    S dy = S(py) - sp.mean[1];
    S power = S(-0.5) * (sp.conic[0] * dx * dx + S(2) * sp.conic[1] * dx * dy +
                         sp.conic[2] * dy * dy);
    const double pv = scalar_value(power);
    if (pv > 0) continue;  // numerically broken conic; skip
    if (cfg.cutoffs && pv < cut) continue;
    using std::exp;
    S g = exp(power);
    S a = min_const(sp.alpha * g, cfg.alpha_clamp);
    if (cfg.cutoffs && scalar_value(a) < cfg.alpha_min) continue;
    S weight = a * tr;
    rgb[0] += sp.color[0] * weight;
    rgb[1] += sp.color[1] * weight;
    rgb[2] += sp.color[2] * weight;
    tr *= S(1) - a;
  }
  out[0] = rgb[0] + S(cfg.background.x) * tr;
  out[1] = rgb[1] + S(cfg.background.y) * tr;
  out[2] = rgb[2] + S(cfg.background.z) * tr;
  out[3] = tr;
}

// ---- production (double) API ----

// rgb + final transmittance per pixel, h*w*4.
struct RenderOutput {
  int h = 0, w = 0;
  std::vector<double> rgba;

  Image image() const {
    Image img(h, w);
    for (int i = 0; i < h * w; ++i)
      for (int c = 0; c < 3; ++c) img.rgb[static_cast<size_t>(i) * 3 + c] = rgba[static_cast<size_t>(i) * 4 + c];
    return img;
  }
};

struct DepthMap {
  int h = 0, w = 0;
  std::vector<double> depth;
  std::vector<uint8_t> valid;
};

// Flat attribute arrays for n primitives (centers 3n, quats 4n, scales 3n,
// opacities n, colors 3n).
struct PrimArrays {
  const double* centers;
  const double* quats;
  const double* scales;
  const double* opacities;
  const double* colors;
  int n;
};

std::vector<TSplat<double>> project_all(const PrimArrays& prims,
                                        const CameraModel& cam,
                                        const SplatConfig& cfg);

// Indices of unculled splats per tile, each list sorted by
// (depth, source_index) ascending.
struct TileBins {
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int>> lists;
};

TileBins bin_tiles(const std::vector<TSplat<double>>& splats,
                   const CameraModel& cam, const SplatConfig& cfg);

// Tile-binned renderer (production path).
RenderOutput rasterize_tiled(const PrimArrays& prims, const CameraModel& cam,
                             const SplatConfig& cfg);
// Per-pixel loop over all splats with a global depth sort (oracle path).
RenderOutput rasterize_reference(const PrimArrays& prims, const CameraModel& cam,
                                 const SplatConfig& cfg);

// Convenience overloads for primitive lists.
RenderOutput rasterize_tiled(const std::vector<GaussianPrimitive>& prims,
                             const CameraModel& cam, const SplatConfig& cfg);
RenderOutput rasterize_reference(const std::vector<GaussianPrimitive>& prims,
                                 const CameraModel& cam, const SplatConfig& cfg);

// Opacity-weighted expected depth from the reference path; pixels with
// accumulated coverage below `min_coverage` are flagged invalid.
DepthMap render_depth(const std::vector<GaussianPrimitive>& prims,
                      const CameraModel& cam, const SplatConfig& cfg,
                      double min_coverage = 0.5);

// Packs a primitive list into flat arrays.
struct PackedPrims {
  std::vector<double> centers, quats, scales, opacities, colors;
  PrimArrays arrays() const {
    return {centers.data(), quats.data(),     scales.data(),
            opacities.data(), colors.data(), static_cast<int>(opacities.size())};
  }
};
PackedPrims pack(const std::vector<GaussianPrimitive>& prims);

}  // namespace spwm::splat

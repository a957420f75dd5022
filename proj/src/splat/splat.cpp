#include "splat/splat.hpp"

#include "numcore/parallel.hpp"

namespace spwm::splat {

PackedPrims pack(const std::vector<GaussianPrimitive>& prims) {
  PackedPrims p;
  p.centers.reserve(prims.size() * 3);
  p.quats.reserve(prims.size() * 4);
  p.scales.reserve(prims.size() * 3);
  p.opacities.reserve(prims.size());
  p.colors.reserve(prims.size() * 3);
  for (const auto& g : prims) {
    p.centers.insert(p.centers.end(), {g.center.x, g.center.y, g.center.z});
    p.quats.insert(p.quats.end(), {g.qw, g.qx, g.qy, g.qz});
    p.scales.insert(p.scales.end(), {g.scale.x, g.scale.y, g.scale.z});
    p.opacities.push_back(g.opacity);
    p.colors.insert(p.colors.end(), {g.color.x, g.color.y, g.color.z});
  }
  return p;
}

std::vector<TSplat<double>> project_all(const PrimArrays& prims,
                                        const CameraModel& cam,
                                        const SplatConfig& cfg) {
  std::vector<TSplat<double>> splats(static_cast<size_t>(prims.n));
  numcore::parallel_for(prims.n, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) {
      TGauss<double> g;
      for (int k = 0; k < 3; ++k) g.p[k] = prims.centers[i * 3 + k];
      for (int k = 0; k < 4; ++k) g.q[k] = prims.quats[i * 4 + k];
      for (int k = 0; k < 3; ++k) g.s[k] = prims.scales[i * 3 + k];
      g.alpha = prims.opacities[i];
      for (int k = 0; k < 3; ++k) g.color[k] = prims.colors[i * 3 + k];
      splats[static_cast<size_t>(i)] = project_gaussian_t(g, cam, cfg, static_cast<int>(i));
    }
  });
  return splats;
}

namespace {

// (depth, source_index) ascending; the index tie-break makes the order a
// strict total order, so parallel schedules cannot reorder compositing.
struct DepthLess {
  const std::vector<TSplat<double>>* splats;
  bool operator()(int a, int b) const {
    const auto& sa = (*splats)[static_cast<size_t>(a)];
    const auto& sb = (*splats)[static_cast<size_t>(b)];
    if (sa.depth != sb.depth) return sa.depth < sb.depth;
    return sa.source_index < sb.source_index;
  }
};

}  // namespace

TileBins bin_tiles(const std::vector<TSplat<double>>& splats,
                   const CameraModel& cam, const SplatConfig& cfg) {
  TileBins bins;
  bins.tiles_x = (cam.width + cfg.tile - 1) / cfg.tile;
  bins.tiles_y = (cam.height + cfg.tile - 1) / cfg.tile;
  bins.lists.assign(static_cast<size_t>(bins.tiles_x) * bins.tiles_y, {});
  for (size_t i = 0; i < splats.size(); ++i) {
    const auto& sp = splats[i];
    if (sp.culled) continue;
    const double r = sp.radius;
    const int x0 = std::max(0, static_cast<int>(std::floor((sp.mean[0] - r) / cfg.tile)));
    const int x1 = std::min(bins.tiles_x - 1, static_cast<int>(std::floor((sp.mean[0] + r) / cfg.tile)));
    const int y0 = std::max(0, static_cast<int>(std::floor((sp.mean[1] - r) / cfg.tile)));
    const int y1 = std::min(bins.tiles_y - 1, static_cast<int>(std::floor((sp.mean[1] + r) / cfg.tile)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        bins.lists[static_cast<size_t>(ty) * bins.tiles_x + tx].push_back(static_cast<int>(i));
  }
  for (auto& list : bins.lists) std::sort(list.begin(), list.end(), DepthLess{&splats});
  return bins;
}

RenderOutput rasterize_tiled(const PrimArrays& prims, const CameraModel& cam,
                             const SplatConfig& cfg) {
  const auto splats = project_all(prims, cam, cfg);
  const auto bins = bin_tiles(splats, cam, cfg);
  RenderOutput out;
  out.h = cam.height;
  out.w = cam.width;
  out.rgba.assign(static_cast<size_t>(out.h) * out.w * 4, 0.0);
  const int n_tiles = bins.tiles_x * bins.tiles_y;
  numcore::parallel_for(n_tiles, [&](int64_t t0, int64_t t1) {
    std::vector<const TSplat<double>*> ptrs;
    for (int64_t t = t0; t < t1; ++t) {
      const int tx = static_cast<int>(t) % bins.tiles_x, ty = static_cast<int>(t) / bins.tiles_x;
      const auto& list = bins.lists[static_cast<size_t>(t)];
      ptrs.clear();
      for (int idx : list) ptrs.push_back(&splats[static_cast<size_t>(idx)]);
      const int px0 = tx * cfg.tile, py0 = ty * cfg.tile;
      const int px1 = std::min(px0 + cfg.tile, cam.width), py1 = std::min(py0 + cfg.tile, cam.height);
      for (int py = py0; py < py1; ++py)
        for (int px = px0; px < px1; ++px) {
          double pix[4];
          composite_pixel<double>(px, py, ptrs.begin(), ptrs.end(), cfg, pix);
          double* o = out.rgba.data() + (static_cast<size_t>(py) * cam.width + px) * 4;
          for (int c = 0; c < 4; ++c) o[c] = pix[c];
        }
    }
  });
  return out;
}

RenderOutput rasterize_reference(const PrimArrays& prims, const CameraModel& cam,
                                 const SplatConfig& cfg) {
  const auto splats = project_all(prims, cam, cfg);
  std::vector<int> order;
  for (size_t i = 0; i < splats.size(); ++i)
    if (!splats[i].culled) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), DepthLess{&splats});
  std::vector<const TSplat<double>*> ptrs;
  for (int idx : order) ptrs.push_back(&splats[static_cast<size_t>(idx)]);

  RenderOutput out;
  out.h = cam.height;
  out.w = cam.width;
  out.rgba.assign(static_cast<size_t>(out.h) * out.w * 4, 0.0);
  numcore::parallel_for(cam.height, [&](int64_t y0, int64_t y1) {
    for (int64_t py = y0; py < y1; ++py)
      for (int px = 0; px < cam.width; ++px) {
        double pix[4];
        composite_pixel<double>(px, static_cast<double>(py), ptrs.begin(), ptrs.end(), cfg, pix);
        double* o = out.rgba.data() + (static_cast<size_t>(py) * cam.width + px) * 4;
        for (int c = 0; c < 4; ++c) o[c] = pix[c];
      }
  });
  return out;
}

RenderOutput rasterize_tiled(const std::vector<GaussianPrimitive>& prims,
                             const CameraModel& cam, const SplatConfig& cfg) {
  const PackedPrims p = pack(prims);
  return rasterize_tiled(p.arrays(), cam, cfg);
}

RenderOutput rasterize_reference(const std::vector<GaussianPrimitive>& prims,
                                 const CameraModel& cam, const SplatConfig& cfg) {
  const PackedPrims p = pack(prims);
  return rasterize_reference(p.arrays(), cam, cfg);
}

DepthMap render_depth(const std::vector<GaussianPrimitive>& prims,
                      const CameraModel& cam, const SplatConfig& cfg,
                      double min_coverage) {
  const PackedPrims packed = pack(prims);
  const auto splats = project_all(packed.arrays(), cam, cfg);
  std::vector<int> order;
  for (size_t i = 0; i < splats.size(); ++i)
    if (!splats[i].culled) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), DepthLess{&splats});

  DepthMap dm;
  dm.h = cam.height;
  dm.w = cam.width;
  dm.depth.assign(static_cast<size_t>(dm.h) * dm.w, 0.0);
  dm.valid.assign(static_cast<size_t>(dm.h) * dm.w, 0);
  const double cut = -0.5 * cfg.sigma_cut * cfg.sigma_cut;
  numcore::parallel_for(cam.height, [&](int64_t y0, int64_t y1) {
    for (int64_t py = y0; py < y1; ++py)
      for (int px = 0; px < cam.width; ++px) {
        double tr = 1.0, wdepth = 0.0;
        for (int idx : order) {
          const auto& sp = splats[static_cast<size_t>(idx)];
          const double dx = px - sp.mean[0], dy = static_cast<double>(py) - sp.mean[1];
          const double power = -0.5 * (sp.conic[0] * dx * dx + 2 * sp.conic[1] * dx * dy +
                                       sp.conic[2] * dy * dy);
          if (power > 0) continue;
          if (cfg.cutoffs && power < cut) continue;
          const double a = std::min(sp.alpha * std::exp(power), cfg.alpha_clamp);
          if (cfg.cutoffs && a < cfg.alpha_min) continue;
          wdepth += sp.depth * a * tr;
          tr *= 1.0 - a;
        }
        const double coverage = 1.0 - tr;
        const size_t pi = static_cast<size_t>(py) * cam.width + px;
        if (coverage >= min_coverage) {
          dm.depth[pi] = wdepth / coverage;
          dm.valid[pi] = 1;
        }
      }
  });
  return dm;
}

}  // namespace spwm::splat

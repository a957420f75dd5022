#pragma once

#include "numcore/ops.hpp"
#include "splat/splat.hpp"

namespace spwm::splat {

// Differentiable tiled rasterization as one tape node. Inputs are attribute
// tensors: centers [N,3], quats [N,4] (any norm; normalized internally),
// scales [N,3] (> 0), opacities [N], colors [N,3]. Output is [H,W,4]:
// rgb plus final transmittance. The backward pass is hand-derived; the test
// suites cross-validate it against autodiff through the reference path and
// against finite differences.
numcore::Tensor rasterize_op(const numcore::Tensor& centers,
                             const numcore::Tensor& quats,
                             const numcore::Tensor& scales,
                             const numcore::Tensor& opacities,
                             const numcore::Tensor& colors,
                             const CameraModel& cam, const SplatConfig& cfg);

// Scalar-autodiff replay of the reference rasterizer (global sort, per-pixel
// loop over all splats). Test-scale inputs only.
numcore::Tensor rasterize_reference_ad(const numcore::Tensor& centers,
                                       const numcore::Tensor& quats,
                                       const numcore::Tensor& scales,
                                       const numcore::Tensor& opacities,
                                       const numcore::Tensor& colors,
                                       const CameraModel& cam,
                                       const SplatConfig& cfg);

}  // namespace spwm::splat

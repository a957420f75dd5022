#pragma once

#include <vector>

#include "common/image.hpp"

namespace spwm::metrics {

// -10*log10(MSE) on [0,1] images; identical images cap at 99 dB.
double psnr(const Image& a, const Image& b);
constexpr double kPsnrCap = 99.0;

// Mean local SSIM: grayscale 0.299/0.587/0.114, 8x8 windows, stride 4,
// C1 = 0.01^2, C2 = 0.03^2 on the [0,1] range.
double ssim(const Image& a, const Image& b);

// Ordinary least-squares slope of the series against its index.
// Needs at least 4 entries.
double drift_slope(const std::vector<double>& series);

struct MetricReport {
  std::vector<double> frame_psnr;
  std::vector<double> frame_ssim;
  double drift = 0.0;            // dB per frame
  double mean_cross_view = 0.0;  // optional; negative when absent
  uint64_t hash = 0;             // 64-bit hash of output bytes
};

}  // namespace spwm::metrics

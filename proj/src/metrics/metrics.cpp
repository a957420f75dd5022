#include "metrics/metrics.hpp"

#include <cmath>

#include "common/error.hpp"

namespace spwm::metrics {

double psnr(const Image& a, const Image& b) {
  SPWM_CHECK(a.h == b.h && a.w == b.w, "psnr: image sizes differ, ", a.h, "x", a.w,
             " vs ", b.h, "x", b.w);
  double mse = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.rgb.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace {

std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(static_cast<size_t>(img.h) * img.w);
  for (int i = 0; i < img.h * img.w; ++i)
    g[static_cast<size_t>(i)] = 0.299 * img.rgb[static_cast<size_t>(i) * 3] +
                                0.587 * img.rgb[static_cast<size_t>(i) * 3 + 1] +
                                0.114 * img.rgb[static_cast<size_t>(i) * 3 + 2];
  return g;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  SPWM_CHECK(a.h == b.h && a.w == b.w, "ssim: image sizes differ");
  constexpr int kWin = 8, kStride = 4;
  SPWM_CHECK(a.h >= kWin && a.w >= kWin, "ssim: image ", a.h, "x", a.w,
             " smaller than the ", kWin, "x", kWin, " window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto ga = grayscale(a), gb = grayscale(b);
  double total = 0;
  int windows = 0;
  for (int y = 0; y + kWin <= a.h; y += kStride)
    for (int x = 0; x + kWin <= a.w; x += kStride) {
      double mx = 0, my = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          mx += ga[static_cast<size_t>(y + dy) * a.w + x + dx];
          my += gb[static_cast<size_t>(y + dy) * a.w + x + dx];
        }
      const double n = kWin * kWin;
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cov = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          const double da = ga[static_cast<size_t>(y + dy) * a.w + x + dx] - mx;
          const double db = gb[static_cast<size_t>(y + dy) * a.w + x + dx] - my;
          vx += da * da;
          vy += db * db;
          cov += da * db;
        }
      vx /= n;
      vy /= n;
      cov /= n;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      windows++;
    }
  return total / windows;
}

double drift_slope(const std::vector<double>& series) {
  const int n = static_cast<int>(series.size());
  SPWM_CHECK(n >= 4, "drift_slope needs at least 4 frames, got ", n);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += i;
    sy += series[static_cast<size_t>(i)];
    sxx += static_cast<double>(i) * i;
    sxy += i * series[static_cast<size_t>(i)];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace spwm::metrics

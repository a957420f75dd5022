#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spwm {

// Interleaved row-major RGB image, values in [0,1] (linear, no gamma).
struct Image {
  int h = 0, w = 0;
  std::vector<double> rgb;  // h*w*3

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), rgb(static_cast<size_t>(h_) * w_ * 3, 0.0) {}

  double& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  double at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// P6 binary PPM, 8-bit, values clamped to [0,1] then scaled by 255.
void save_ppm(const std::string& path, const Image& img);

// Raw little-endian f64 payload, h*w*3 doubles. Training source of truth.
void save_f64(const std::string& path, const Image& img);
Image load_f64(const std::string& path, int h, int w);

// 64-bit FNV-1a over the raw bytes, used for determinism checks.
uint64_t image_hash(const Image& img);

}  // namespace spwm

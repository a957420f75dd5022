#include "common/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "common/error.hpp"

namespace spwm {

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  SPWM_IO_CHECK(os.good(), "cannot write '", path, "'");
  os << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> bytes(img.rgb.size());
  for (size_t i = 0; i < img.rgb.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, img.rgb[i]));
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  SPWM_IO_CHECK(os.good(), "write failure for '", path, "'");
}

void save_f64(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  SPWM_IO_CHECK(os.good(), "cannot write '", path, "'");
  os.write(reinterpret_cast<const char*>(img.rgb.data()),
           static_cast<std::streamsize>(sizeof(double) * img.rgb.size()));
  SPWM_IO_CHECK(os.good(), "write failure for '", path, "'");
}

Image load_f64(const std::string& path, int h, int w) {
  std::ifstream is(path, std::ios::binary);
  SPWM_IO_CHECK(is.good(), "cannot open '", path, "'");
  Image img(h, w);
  is.read(reinterpret_cast<char*>(img.rgb.data()),
          static_cast<std::streamsize>(sizeof(double) * img.rgb.size()));
  SPWM_IO_CHECK(is.good(), "truncated image file '", path, "'");
  return img;
}

uint64_t image_hash(const Image& img) {
  uint64_t h = 1469598103934665603ULL;
  const unsigned char* b = reinterpret_cast<const unsigned char*>(img.rgb.data());
  for (size_t i = 0; i < sizeof(double) * img.rgb.size(); ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace spwm

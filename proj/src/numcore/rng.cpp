#include "numcore/rng.hpp"

#include <cmath>

#include "common/error.hpp"

namespace spwm::numcore {

namespace {
constexpr unsigned __int128 pcg_mult() {
  return (static_cast<unsigned __int128>(2549297995355413924ULL) << 64) |
         4865540595714422341ULL;
}
inline uint64_t rotr64(uint64_t v, unsigned rot) {
  return (v >> rot) | (v << ((-rot) & 63));
}
}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed) {
  inc_ = ((static_cast<unsigned __int128>(stream) << 1) | 1u);
  state_ = 0;
  next_u64();
  state_ += (static_cast<unsigned __int128>(seed) << 64) | seed;
  next_u64();
}

uint64_t Rng::next_u64() {
  state_ = state_ * pcg_mult() + inc_;
  const uint64_t xored = static_cast<uint64_t>(state_ >> 64) ^ static_cast<uint64_t>(state_);
  const unsigned rot = static_cast<unsigned>(state_ >> 122);
  return rotr64(xored, rot);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t Rng::uniform_int(int64_t n) {
  SPWM_CHECK(n > 0, "uniform_int needs n > 0, got ", n);
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<int64_t>(v % un);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<double> Rng::normal_vec(int64_t n, double stddev) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& v : out) v = normal() * stddev;
  return out;
}

std::vector<double> Rng::uniform_vec(int64_t n, double lo, double hi) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& v : out) v = uniform(lo, hi);
  return out;
}

}  // namespace spwm::numcore

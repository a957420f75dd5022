#pragma once

#include <cstdint>
#include <vector>

namespace spwm::numcore {

// PCG64 (XSL-RR variant) with a fixed stream layout. Same seed gives the
// same stream on every platform. Gaussian draws use Box-Muller; both halves
// are consumed in a defined order (cosine half first, sine half cached).
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), rejection sampled (unbiased).
  int64_t uniform_int(int64_t n);

  double normal();  // standard normal
  std::vector<double> normal_vec(int64_t n, double stddev = 1.0);
  std::vector<double> uniform_vec(int64_t n, double lo = 0.0, double hi = 1.0);

  uint64_t seed() const { return seed_; }

  // Derives an independent generator; (seed, stream) pairs never collide
  // across distinct stream tags.
  Rng fork(uint64_t stream_tag) const { return Rng(seed_, stream_tag); }

 private:
  unsigned __int128 state_;
  unsigned __int128 inc_;
  uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace spwm::numcore

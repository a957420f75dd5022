#include "numcore/kernels.hpp"

#include <cstring>

#include "numcore/parallel.hpp"

namespace spwm::numcore::kern {

// Inner loops keep each output element owned by one iteration with a fixed
// accumulation order, so results do not depend on the parallel split.

void matmul_nn(double* c, const double* a, const double* b, int64_t m,
               int64_t k, int64_t n, bool accumulate) {
  parallel_for(m, [=](int64_t r0, int64_t r1) {
    for (int64_t i = r0; i < r1; ++i) {
      double* __restrict__ crow = c + i * n;
      if (!accumulate) std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
      const double* arow = a + i * k;
      for (int64_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* __restrict__ brow = b + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

void matmul_nt(double* c, const double* a, const double* b, int64_t m,
               int64_t k, int64_t n, bool accumulate) {
  parallel_for(m, [=](int64_t r0, int64_t r1) {
    for (int64_t i = r0; i < r1; ++i) {
      const double* arow = a + i * k;
      double* __restrict__ crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        // 4-way unrolled dot; fixed order regardless of thread count.
        double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
        int64_t p = 0;
        for (; p + 4 <= k; p += 4) {
          s0 += arow[p] * brow[p];
          s1 += arow[p + 1] * brow[p + 1];
          s2 += arow[p + 2] * brow[p + 2];
          s3 += arow[p + 3] * brow[p + 3];
        }
        double s = (s0 + s1) + (s2 + s3);
        for (; p < k; ++p) s += arow[p] * brow[p];
        if (accumulate)
          crow[j] += s;
        else
          crow[j] = s;
      }
    }
  });
}

void matmul_tn(double* c, const double* a, const double* b, int64_t m,
               int64_t k, int64_t n, bool accumulate) {
  parallel_for(k, [=](int64_t r0, int64_t r1) {
    for (int64_t i = r0; i < r1; ++i) {
      double* __restrict__ crow = c + i * n;
      if (!accumulate) std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
      for (int64_t p = 0; p < m; ++p) {
        const double av = a[p * k + i];
        if (av == 0.0) continue;
        const double* __restrict__ brow = b + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

}  // namespace spwm::numcore::kern

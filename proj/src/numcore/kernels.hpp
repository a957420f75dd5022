#pragma once

#include <cstdint>

namespace spwm::numcore::kern {

// C[M,N] (+)= A[M,K] * B[K,N]
void matmul_nn(double* c, const double* a, const double* b, int64_t m,
               int64_t k, int64_t n, bool accumulate);
// C[M,N] (+)= A[M,K] * B[N,K]^T
void matmul_nt(double* c, const double* a, const double* b, int64_t m,
               int64_t k, int64_t n, bool accumulate);
// C[K,N] (+)= A[M,K]^T * B[M,N]
void matmul_tn(double* c, const double* a, const double* b, int64_t m,
               int64_t k, int64_t n, bool accumulate);

}  // namespace spwm::numcore::kern

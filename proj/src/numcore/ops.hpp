#pragma once

#include <cstdint>
#include <vector>

#include "numcore/tape.hpp"
#include "numcore/tensor.hpp"

namespace spwm::numcore {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor stop_gradient(const Tensor& a);

// ---- reductions ----
Tensor reduce_sum(const Tensor& a);
Tensor reduce_mean(const Tensor& a);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);     // [M,K]x[K,N]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [M,K]x[N,K]^T -> [M,N]
Tensor transpose(const Tensor& a);                   // [M,N] -> [N,M]
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // a[...,D] + v[D]
Tensor mul_rowvec(const Tensor& a, const Tensor& v);
Tensor l2_normalize_rows(const Tensor& a);  // rows of [N,D] to unit length

// ---- shape ----
Tensor reshape(const Tensor& a, Shape s);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);  // all [N,Di]
Tensor slice_rows(const Tensor& a, int start, int count);
Tensor slice_cols(const Tensor& a, int start, int count);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
// Rows of src land at dst row idx[i]; remaining rows are zero. Indices must
// be unique.
Tensor scatter_rows(int n_rows, const std::vector<int>& idx, const Tensor& src);

// ---- neural net ----
// x [N,D]; gain/bias [D]. Per-row mean/variance normalization.
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);
// x [Ci,H,W], w [Co,Ci,3,3], b [Co]; padding 1, stride in {1,2}.
Tensor conv2d3x3(const Tensor& x, const Tensor& w, const Tensor& b, int stride);
// Row softmax over entries with mask != 0; masked entries are exactly zero
// and are never read by the reduction. All-masked rows yield all zeros.
Tensor masked_softmax(const Tensor& logits, const std::vector<uint8_t>& mask);
// q [B*Tq, H*dh], k/v [B*Tk, H*dh]. Multi-head scaled dot-product attention
// over B independent sequences. add_mask, when given, is [Tq,Tk] with
// entries 0 or -inf; -inf entries are skipped entirely.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int batch,
                 int heads, const Tensor* add_mask = nullptr);
// F [C,h,w]; uv is M (u,v) pairs in grid coordinates; border clamp.
Tensor bilinear_sample(const Tensor& f, const std::vector<double>& uv);
// w [N,S], f [N*S, D] -> out[n,:] = sum_s w[n,s] * f[n*S+s,:]
Tensor weighted_sum(const Tensor& w, const Tensor& f);

// ---- composites ----
Tensor mse_loss(const Tensor& a, const Tensor& b);     // mean squared error
Tensor l1_loss(const Tensor& a, const Tensor& b);      // mean absolute error

}  // namespace spwm::numcore

#include "numcore/ops.hpp"

#include <cmath>
#include <cstring>

#include "numcore/kernels.hpp"
#include "numcore/parallel.hpp"

namespace spwm::numcore {

namespace {

struct In {
  int node = -1;
  int64_t size = 0;
};

In input_of(const Tensor& t) {
  return tracked(t) ? In{t.node(), t.size()} : In{-1, t.size()};
}

Tensor finish(Tensor out, std::vector<int> parents, Tape::BackwardFn fn) {
  Tape* t = Tape::current();
  if (!t || !fn) return out;
  const int id = t->record(std::move(parents), std::move(fn));
  return out.with_node(id, t);
}

void axpy(std::vector<double>& dst, const double* src, int64_t n, double c = 1.0) {
  for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += c * src[i];
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  SPWM_CHECK(a.shape() == b.shape(), "add: shape mismatch ", shape_str(a.shape()),
             " vs ", shape_str(b.shape()));
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = pa[i] + pb[i];
  In ia = input_of(a), ib = input_of(b);
  if (ia.node < 0 && ib.node < 0) return Tensor(a.shape(), std::move(out));
  return finish(Tensor(a.shape(), std::move(out)), {ia.node, ib.node},
                [ia, ib, n](const std::vector<double>& g, Tape& tp) {
                  if (ia.node >= 0) axpy(tp.grad_buf(ia.node, n), g.data(), n);
                  if (ib.node >= 0) axpy(tp.grad_buf(ib.node, n), g.data(), n);
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  SPWM_CHECK(a.shape() == b.shape(), "sub: shape mismatch ", shape_str(a.shape()),
             " vs ", shape_str(b.shape()));
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = pa[i] - pb[i];
  In ia = input_of(a), ib = input_of(b);
  if (ia.node < 0 && ib.node < 0) return Tensor(a.shape(), std::move(out));
  return finish(Tensor(a.shape(), std::move(out)), {ia.node, ib.node},
                [ia, ib, n](const std::vector<double>& g, Tape& tp) {
                  if (ia.node >= 0) axpy(tp.grad_buf(ia.node, n), g.data(), n);
                  if (ib.node >= 0) axpy(tp.grad_buf(ib.node, n), g.data(), n, -1.0);
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  SPWM_CHECK(a.shape() == b.shape(), "mul: shape mismatch ", shape_str(a.shape()),
             " vs ", shape_str(b.shape()));
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = pa[i] * pb[i];
  In ia = input_of(a), ib = input_of(b);
  if (ia.node < 0 && ib.node < 0) return Tensor(a.shape(), std::move(out));
  return finish(Tensor(a.shape(), std::move(out)), {ia.node, ib.node},
                [ia, ib, a, b, n](const std::vector<double>& g, Tape& tp) {
                  if (ia.node >= 0) {
                    auto& ga = tp.grad_buf(ia.node, n);
                    const double* pb2 = b.data();
                    for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * pb2[i];
                  }
                  if (ib.node >= 0) {
                    auto& gb = tp.grad_buf(ib.node, n);
                    const double* pa2 = a.data();
                    for (int64_t i = 0; i < n; ++i) gb[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * pa2[i];
                  }
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  SPWM_CHECK(a.shape() == b.shape(), "div: shape mismatch ", shape_str(a.shape()),
             " vs ", shape_str(b.shape()));
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = pa[i] / pb[i];
  In ia = input_of(a), ib = input_of(b);
  if (ia.node < 0 && ib.node < 0) return Tensor(a.shape(), std::move(out));
  return finish(Tensor(a.shape(), std::move(out)), {ia.node, ib.node},
                [ia, ib, a, b, n](const std::vector<double>& g, Tape& tp) {
                  const double *pa2 = a.data(), *pb2 = b.data();
                  if (ia.node >= 0) {
                    auto& ga = tp.grad_buf(ia.node, n);
                    for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] / pb2[i];
                  }
                  if (ib.node >= 0) {
                    auto& gb = tp.grad_buf(ib.node, n);
                    for (int64_t i = 0; i < n; ++i)
                      gb[static_cast<size_t>(i)] -= g[static_cast<size_t>(i)] * pa2[i] / (pb2[i] * pb2[i]);
                  }
                });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double* pa = a.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = c * pa[i];
  In ia = input_of(a);
  if (ia.node < 0) return Tensor(a.shape(), std::move(out));
  return finish(Tensor(a.shape(), std::move(out)), {ia.node},
                [ia, c, n](const std::vector<double>& g, Tape& tp) {
                  axpy(tp.grad_buf(ia.node, n), g.data(), n, c);
                });
}

Tensor add_const(const Tensor& a, double c) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double* pa = a.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = pa[i] + c;
  In ia = input_of(a);
  if (ia.node < 0) return Tensor(a.shape(), std::move(out));
  return finish(Tensor(a.shape(), std::move(out)), {ia.node},
                [ia, n](const std::vector<double>& g, Tape& tp) {
                  axpy(tp.grad_buf(ia.node, n), g.data(), n);
                });
}

namespace {

template <typename Fwd, typename Dfn>
Tensor unary_ew(const Tensor& a, Fwd fwd, Dfn dfn_from_out_and_in) {
  const int64_t n = a.size();
  std::vector<double> out(static_cast<size_t>(n));
  const double* pa = a.data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(pa[i]);
  Tensor r(a.shape(), std::move(out));
  In ia = input_of(a);
  if (ia.node < 0) return r;
  return finish(std::move(r), {ia.node},
                [ia, a, r, n, dfn_from_out_and_in](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, n);
                  const double *pin = a.data(), *pout = r.data();
                  for (int64_t i = 0; i < n; ++i)
                    ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * dfn_from_out_and_in(pout[i], pin[i]);
                });
}

}  // namespace

Tensor exp(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::exp(x); },
                  [](double y, double) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::log(x); },
                  [](double, double x) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::tanh(x); },
                  [](double y, double) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_ew(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double y, double) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  // log(1+e^x) with the large-x branch to avoid overflow.
  return unary_ew(a,
                  [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                  [](double, double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor abs(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::fabs(x); },
                  [](double, double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& a) {
  return unary_ew(a, [](double x) { return std::sqrt(x); },
                  [](double y, double) { return 0.5 / y; });
}

Tensor stop_gradient(const Tensor& a) { return a.detached(); }

// ---------------------------------------------------------------- reductions

Tensor reduce_sum(const Tensor& a) {
  const int64_t n = a.size();
  const double* pa = a.data();
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += pa[i];
  In ia = input_of(a);
  if (ia.node < 0) return Tensor::scalar(s);
  return finish(Tensor::scalar(s), {ia.node},
                [ia, n](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, n);
                  for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g[0];
                });
}

Tensor reduce_mean(const Tensor& a) {
  const int64_t n = a.size();
  SPWM_CHECK(n > 0, "reduce_mean on empty tensor");
  const double* pa = a.data();
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += pa[i];
  s /= static_cast<double>(n);
  In ia = input_of(a);
  if (ia.node < 0) return Tensor::scalar(s);
  return finish(Tensor::scalar(s), {ia.node},
                [ia, n](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, n);
                  const double c = g[0] / static_cast<double>(n);
                  for (int64_t i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += c;
                });
}

// ------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  SPWM_CHECK(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
             "matmul: incompatible shapes ", shape_str(a.shape()), " x ",
             shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m * n));
  kern::matmul_nn(out.data(), a.data(), b.data(), m, k, n, false);
  Tensor r({static_cast<int>(m), static_cast<int>(n)}, std::move(out));
  In ia = input_of(a), ib = input_of(b);
  if (ia.node < 0 && ib.node < 0) return r;
  return finish(std::move(r), {ia.node, ib.node},
                [ia, ib, a, b, m, k, n](const std::vector<double>& g, Tape& tp) {
                  if (ia.node >= 0) {
                    auto& ga = tp.grad_buf(ia.node, m * k);
                    kern::matmul_nt(ga.data(), g.data(), b.data(), m, n, k, true);
                  }
                  if (ib.node >= 0) {
                    auto& gb = tp.grad_buf(ib.node, k * n);
                    kern::matmul_tn(gb.data(), a.data(), g.data(), m, k, n, true);
                  }
                });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  SPWM_CHECK(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
             "matmul_nt: incompatible shapes ", shape_str(a.shape()), " x ",
             shape_str(b.shape()), "^T");
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  std::vector<double> out(static_cast<size_t>(m * n));
  kern::matmul_nt(out.data(), a.data(), b.data(), m, k, n, false);
  Tensor r({static_cast<int>(m), static_cast<int>(n)}, std::move(out));
  In ia = input_of(a), ib = input_of(b);
  if (ia.node < 0 && ib.node < 0) return r;
  return finish(std::move(r), {ia.node, ib.node},
                [ia, ib, a, b, m, k, n](const std::vector<double>& g, Tape& tp) {
                  if (ia.node >= 0) {
                    auto& ga = tp.grad_buf(ia.node, m * k);
                    kern::matmul_nn(ga.data(), g.data(), b.data(), m, n, k, true);
                  }
                  if (ib.node >= 0) {
                    auto& gb = tp.grad_buf(ib.node, n * k);
                    kern::matmul_tn(gb.data(), g.data(), a.data(), m, n, k, true);
                  }
                });
}

Tensor transpose(const Tensor& a) {
  SPWM_CHECK(a.ndim() == 2, "transpose expects 2-d, got ", shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(a.size()));
  const double* pa = a.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = pa[static_cast<size_t>(i) * n + j];
  Tensor r({n, m}, std::move(out));
  In ia = input_of(a);
  if (ia.node < 0) return r;
  return finish(std::move(r), {ia.node},
                [ia, m, n](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, static_cast<int64_t>(m) * n);
                  for (int j = 0; j < n; ++j)
                    for (int i = 0; i < m; ++i)
                      ga[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
                });
}

namespace {

int rows_times_cols(const Tensor& a, int d, const char* opname) {
  SPWM_CHECK(a.ndim() >= 1 && a.dim(a.ndim() - 1) == d, opname,
             ": trailing dim of ", shape_str(a.shape()), " must be ", d);
  return static_cast<int>(a.size() / d);
}

}  // namespace

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  const int d = static_cast<int>(v.size());
  const int rows = rows_times_cols(a, d, "add_rowvec");
  std::vector<double> out(static_cast<size_t>(a.size()));
  const double *pa = a.data(), *pv = v.data();
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < d; ++j)
      out[static_cast<size_t>(r) * d + j] = pa[static_cast<size_t>(r) * d + j] + pv[j];
  Tensor r(a.shape(), std::move(out));
  In ia = input_of(a), iv = input_of(v);
  if (ia.node < 0 && iv.node < 0) return r;
  return finish(std::move(r), {ia.node, iv.node},
                [ia, iv, rows, d](const std::vector<double>& g, Tape& tp) {
                  if (ia.node >= 0) axpy(tp.grad_buf(ia.node, ia.size), g.data(), ia.size);
                  if (iv.node >= 0) {
                    auto& gv = tp.grad_buf(iv.node, d);
                    for (int r = 0; r < rows; ++r)
                      for (int j = 0; j < d; ++j) gv[static_cast<size_t>(j)] += g[static_cast<size_t>(r) * d + j];
                  }
                });
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
  const int d = static_cast<int>(v.size());
  const int rows = rows_times_cols(a, d, "mul_rowvec");
  std::vector<double> out(static_cast<size_t>(a.size()));
  const double *pa = a.data(), *pv = v.data();
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < d; ++j)
      out[static_cast<size_t>(r) * d + j] = pa[static_cast<size_t>(r) * d + j] * pv[j];
  Tensor r(a.shape(), std::move(out));
  In ia = input_of(a), iv = input_of(v);
  if (ia.node < 0 && iv.node < 0) return r;
  return finish(std::move(r), {ia.node, iv.node},
                [ia, iv, a, v, rows, d](const std::vector<double>& g, Tape& tp) {
                  const double *pa2 = a.data(), *pv2 = v.data();
                  if (ia.node >= 0) {
                    auto& ga = tp.grad_buf(ia.node, ia.size);
                    for (int r = 0; r < rows; ++r)
                      for (int j = 0; j < d; ++j)
                        ga[static_cast<size_t>(r) * d + j] += g[static_cast<size_t>(r) * d + j] * pv2[j];
                  }
                  if (iv.node >= 0) {
                    auto& gv = tp.grad_buf(iv.node, d);
                    for (int r = 0; r < rows; ++r)
                      for (int j = 0; j < d; ++j)
                        gv[static_cast<size_t>(j)] += g[static_cast<size_t>(r) * d + j] * pa2[static_cast<size_t>(r) * d + j];
                  }
                });
}

Tensor l2_normalize_rows(const Tensor& a) {
  SPWM_CHECK(a.ndim() == 2, "l2_normalize_rows expects 2-d, got ", shape_str(a.shape()));
  const int rows = a.dim(0), d = a.dim(1);
  std::vector<double> out(static_cast<size_t>(a.size()));
  std::vector<double> norms(static_cast<size_t>(rows));
  const double* pa = a.data();
  for (int r = 0; r < rows; ++r) {
    double s = 0;
    for (int j = 0; j < d; ++j) s += pa[static_cast<size_t>(r) * d + j] * pa[static_cast<size_t>(r) * d + j];
    const double nrm = std::sqrt(s + 1e-24);
    norms[static_cast<size_t>(r)] = nrm;
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(r) * d + j] = pa[static_cast<size_t>(r) * d + j] / nrm;
  }
  Tensor res(a.shape(), std::move(out));
  In ia = input_of(a);
  if (ia.node < 0) return res;
  return finish(std::move(res), {ia.node},
                [ia, res, norms, rows, d](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, ia.size);
                  const double* py = res.data();
                  for (int r = 0; r < rows; ++r) {
                    double ydotg = 0;
                    for (int j = 0; j < d; ++j)
                      ydotg += py[static_cast<size_t>(r) * d + j] * g[static_cast<size_t>(r) * d + j];
                    const double inv = 1.0 / norms[static_cast<size_t>(r)];
                    for (int j = 0; j < d; ++j)
                      ga[static_cast<size_t>(r) * d + j] +=
                          (g[static_cast<size_t>(r) * d + j] - py[static_cast<size_t>(r) * d + j] * ydotg) * inv;
                  }
                });
}

// ----------------------------------------------------------------- shape ops

Tensor reshape(const Tensor& a, Shape s) {
  Tensor r = a.reshaped(std::move(s));
  return r;  // node id carries over; gradient shape is flat anyway
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  SPWM_CHECK(!parts.empty(), "concat_rows: no inputs");
  int cols = parts[0].ndim() == 1 ? 1 : static_cast<int>(parts[0].size() / parts[0].dim(0));
  int total_rows = 0;
  for (const auto& p : parts) {
    SPWM_CHECK(p.ndim() >= 1, "concat_rows: scalar input");
    const int c = p.ndim() == 1 ? 1 : static_cast<int>(p.size() / p.dim(0));
    SPWM_CHECK(c == cols, "concat_rows: column mismatch ", c, " vs ", cols);
    total_rows += p.dim(0);
  }
  std::vector<double> out(static_cast<size_t>(total_rows) * cols);
  std::vector<In> ins;
  std::vector<int> offsets;
  std::vector<int> parents;
  int row = 0;
  bool any = false;
  for (const auto& p : parts) {
    std::memcpy(out.data() + static_cast<size_t>(row) * cols, p.data(),
                sizeof(double) * static_cast<size_t>(p.size()));
    In ip = input_of(p);
    any |= ip.node >= 0;
    ins.push_back(ip);
    parents.push_back(ip.node);
    offsets.push_back(row);
    row += p.dim(0);
  }
  Tensor r({total_rows, cols}, std::move(out));
  if (parts[0].ndim() == 1) r = r.reshaped({total_rows});
  if (!any) return r;
  return finish(std::move(r), std::move(parents),
                [ins, offsets, cols](const std::vector<double>& g, Tape& tp) {
                  for (size_t i = 0; i < ins.size(); ++i) {
                    if (ins[i].node < 0) continue;
                    auto& gp = tp.grad_buf(ins[i].node, ins[i].size);
                    const double* src = g.data() + static_cast<size_t>(offsets[i]) * cols;
                    for (int64_t j = 0; j < ins[i].size; ++j) gp[static_cast<size_t>(j)] += src[j];
                  }
                });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  SPWM_CHECK(!parts.empty(), "concat_cols: no inputs");
  const int rows = parts[0].dim(0);
  int total_cols = 0;
  for (const auto& p : parts) {
    SPWM_CHECK(p.ndim() == 2 && p.dim(0) == rows, "concat_cols: row mismatch");
    total_cols += p.dim(1);
  }
  std::vector<double> out(static_cast<size_t>(rows) * total_cols);
  std::vector<In> ins;
  std::vector<int> col_off, widths, parents;
  int off = 0;
  bool any = false;
  for (const auto& p : parts) {
    const int w = p.dim(1);
    const double* src = p.data();
    for (int r = 0; r < rows; ++r)
      std::memcpy(out.data() + static_cast<size_t>(r) * total_cols + off,
                  src + static_cast<size_t>(r) * w, sizeof(double) * static_cast<size_t>(w));
    In ip = input_of(p);
    any |= ip.node >= 0;
    ins.push_back(ip);
    parents.push_back(ip.node);
    col_off.push_back(off);
    widths.push_back(w);
    off += w;
  }
  Tensor r({rows, total_cols}, std::move(out));
  if (!any) return r;
  return finish(std::move(r), std::move(parents),
                [ins, col_off, widths, rows, total_cols](const std::vector<double>& g, Tape& tp) {
                  for (size_t i = 0; i < ins.size(); ++i) {
                    if (ins[i].node < 0) continue;
                    const int w = widths[i];
                    auto& gp = tp.grad_buf(ins[i].node, static_cast<int64_t>(rows) * w);
                    for (int r = 0; r < rows; ++r)
                      for (int j = 0; j < w; ++j)
                        gp[static_cast<size_t>(r) * w + j] +=
                            g[static_cast<size_t>(r) * total_cols + col_off[i] + j];
                  }
                });
}

Tensor slice_rows(const Tensor& a, int start, int count) {
  SPWM_CHECK(a.ndim() >= 1 && start >= 0 && count >= 0 && start + count <= a.dim(0),
             "slice_rows: range [", start, ",", start + count, ") out of ",
             a.dim(0), " rows");
  const int cols = a.ndim() == 1 ? 1 : static_cast<int>(a.size() / a.dim(0));
  std::vector<double> out(static_cast<size_t>(count) * cols);
  std::memcpy(out.data(), a.data() + static_cast<size_t>(start) * cols,
              sizeof(double) * out.size());
  Shape s = a.shape();
  s[0] = count;
  Tensor r(s, std::move(out));
  In ia = input_of(a);
  if (ia.node < 0) return r;
  return finish(std::move(r), {ia.node},
                [ia, start, count, cols](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, ia.size);
                  for (int64_t j = 0; j < static_cast<int64_t>(count) * cols; ++j)
                    ga[static_cast<size_t>(start) * cols + j] += g[static_cast<size_t>(j)];
                });
}

Tensor slice_cols(const Tensor& a, int start, int count) {
  SPWM_CHECK(a.ndim() == 2 && start >= 0 && start + count <= a.dim(1),
             "slice_cols: range [", start, ",", start + count, ") out of ",
             a.ndim() == 2 ? a.dim(1) : -1, " cols");
  const int rows = a.dim(0), d = a.dim(1);
  std::vector<double> out(static_cast<size_t>(rows) * count);
  const double* pa = a.data();
  for (int r = 0; r < rows; ++r)
    std::memcpy(out.data() + static_cast<size_t>(r) * count,
                pa + static_cast<size_t>(r) * d + start, sizeof(double) * static_cast<size_t>(count));
  Tensor res({rows, count}, std::move(out));
  In ia = input_of(a);
  if (ia.node < 0) return res;
  return finish(std::move(res), {ia.node},
                [ia, rows, d, start, count](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, static_cast<int64_t>(rows) * d);
                  for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < count; ++j)
                      ga[static_cast<size_t>(r) * d + start + j] += g[static_cast<size_t>(r) * count + j];
                });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  SPWM_CHECK(a.ndim() >= 1, "gather_rows: need at least 1-d");
  const int cols = a.ndim() == 1 ? 1 : static_cast<int>(a.size() / a.dim(0));
  const int n_rows = a.dim(0);
  std::vector<double> out(idx.size() * static_cast<size_t>(cols));
  const double* pa = a.data();
  for (size_t i = 0; i < idx.size(); ++i) {
    SPWM_CHECK(idx[i] >= 0 && idx[i] < n_rows, "gather_rows: index ", idx[i],
               " out of range [0,", n_rows, ")");
    std::memcpy(out.data() + i * cols, pa + static_cast<size_t>(idx[i]) * cols,
                sizeof(double) * static_cast<size_t>(cols));
  }
  Shape s = a.shape();
  s[0] = static_cast<int>(idx.size());
  Tensor r(s, std::move(out));
  In ia = input_of(a);
  if (ia.node < 0) return r;
  return finish(std::move(r), {ia.node},
                [ia, idx, cols](const std::vector<double>& g, Tape& tp) {
                  auto& ga = tp.grad_buf(ia.node, ia.size);
                  for (size_t i = 0; i < idx.size(); ++i)
                    for (int j = 0; j < cols; ++j)
                      ga[static_cast<size_t>(idx[i]) * cols + j] += g[i * cols + j];
                });
}

Tensor scatter_rows(int n_rows, const std::vector<int>& idx, const Tensor& src) {
  SPWM_CHECK(src.ndim() == 2 && static_cast<int>(idx.size()) == src.dim(0),
             "scatter_rows: index count ", idx.size(), " vs src rows ",
             src.ndim() == 2 ? src.dim(0) : -1);
  const int cols = src.dim(1);
  std::vector<double> out(static_cast<size_t>(n_rows) * cols, 0.0);
  const double* ps = src.data();
  for (size_t i = 0; i < idx.size(); ++i) {
    SPWM_CHECK(idx[i] >= 0 && idx[i] < n_rows, "scatter_rows: index ", idx[i],
               " out of range [0,", n_rows, ")");
    std::memcpy(out.data() + static_cast<size_t>(idx[i]) * cols, ps + i * cols,
                sizeof(double) * static_cast<size_t>(cols));
  }
  Tensor r({n_rows, cols}, std::move(out));
  In is = input_of(src);
  if (is.node < 0) return r;
  return finish(std::move(r), {is.node},
                [is, idx, cols](const std::vector<double>& g, Tape& tp) {
                  auto& gs = tp.grad_buf(is.node, is.size);
                  for (size_t i = 0; i < idx.size(); ++i)
                    for (int j = 0; j < cols; ++j)
                      gs[i * cols + j] += g[static_cast<size_t>(idx[i]) * cols + j];
                });
}

// ----------------------------------------------------------------- composites

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  Tensor d = sub(a, b);
  return reduce_mean(mul(d, d));
}

Tensor l1_loss(const Tensor& a, const Tensor& b) { return reduce_mean(abs(sub(a, b))); }

}  // namespace spwm::numcore

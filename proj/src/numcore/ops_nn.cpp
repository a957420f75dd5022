#include <cmath>
#include <cstring>
#include <limits>

#include "numcore/ops.hpp"
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

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

// ------------------------------------------------------------------ layernorm

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  SPWM_CHECK(x.ndim() == 2, "layernorm expects [N,D], got ", shape_str(x.shape()));
  const int rows = x.dim(0), d = x.dim(1);
  SPWM_CHECK(static_cast<int>(gain.size()) == d && static_cast<int>(bias.size()) == d,
             "layernorm: gain/bias size must be ", d);
  std::vector<double> out(static_cast<size_t>(x.size()));
  std::vector<double> inv_std(static_cast<size_t>(rows)), mean(static_cast<size_t>(rows));
  const double *px = x.data(), *pg = gain.data(), *pb = bias.data();
  for (int r = 0; r < rows; ++r) {
    const double* row = px + static_cast<size_t>(r) * d;
    double mu = 0;
    for (int j = 0; j < d; ++j) mu += row[j];
    mu /= d;
    double var = 0;
    for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    mean[static_cast<size_t>(r)] = mu;
    inv_std[static_cast<size_t>(r)] = inv;
    for (int j = 0; j < d; ++j)
      out[static_cast<size_t>(r) * d + j] = pg[j] * (row[j] - mu) * inv + pb[j];
  }
  Tensor res(x.shape(), std::move(out));
  In ix = input_of(x), ig = input_of(gain), ib = input_of(bias);
  if (ix.node < 0 && ig.node < 0 && ib.node < 0) return res;
  return finish(
      std::move(res), {ix.node, ig.node, ib.node},
      [ix, ig, ib, x, gain, mean, inv_std, rows, d](const std::vector<double>& g, Tape& tp) {
        const double *px2 = x.data(), *pg2 = gain.data();
        if (ix.node >= 0) {
          auto& gx = tp.grad_buf(ix.node, ix.size);
          for (int r = 0; r < rows; ++r) {
            const double* row = px2 + static_cast<size_t>(r) * d;
            const double* grow = g.data() + static_cast<size_t>(r) * d;
            const double inv = inv_std[static_cast<size_t>(r)], mu = mean[static_cast<size_t>(r)];
            double sum_dxh = 0, sum_dxh_xh = 0;
            for (int j = 0; j < d; ++j) {
              const double xh = (row[j] - mu) * inv;
              const double dxh = grow[j] * pg2[j];
              sum_dxh += dxh;
              sum_dxh_xh += dxh * xh;
            }
            for (int j = 0; j < d; ++j) {
              const double xh = (row[j] - mu) * inv;
              const double dxh = grow[j] * pg2[j];
              gx[static_cast<size_t>(r) * d + j] +=
                  inv * (dxh - sum_dxh / d - xh * sum_dxh_xh / d);
            }
          }
        }
        if (ig.node >= 0) {
          auto& gg = tp.grad_buf(ig.node, d);
          for (int r = 0; r < rows; ++r) {
            const double inv = inv_std[static_cast<size_t>(r)], mu = mean[static_cast<size_t>(r)];
            for (int j = 0; j < d; ++j)
              gg[static_cast<size_t>(j)] += g[static_cast<size_t>(r) * d + j] *
                                            (px2[static_cast<size_t>(r) * d + j] - mu) * inv;
          }
        }
        if (ib.node >= 0) {
          auto& gb = tp.grad_buf(ib.node, d);
          for (int r = 0; r < rows; ++r)
            for (int j = 0; j < d; ++j) gb[static_cast<size_t>(j)] += g[static_cast<size_t>(r) * d + j];
        }
      });
}

// --------------------------------------------------------------------- conv2d

#include "numcore/ops_conv.inc"

Tensor conv2d3x3(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  SPWM_CHECK(x.ndim() == 3, "conv2d3x3: input must be [C,H,W], got ", shape_str(x.shape()));
  SPWM_CHECK(w.ndim() == 4 && w.dim(2) == 3 && w.dim(3) == 3,
             "conv2d3x3: weight must be [Co,Ci,3,3], got ", shape_str(w.shape()));
  SPWM_CHECK(w.dim(1) == x.dim(0), "conv2d3x3: channel mismatch ", w.dim(1),
             " vs ", x.dim(0));
  SPWM_CHECK(stride == 1 || stride == 2, "conv2d3x3: stride must be 1 or 2");
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2), co = w.dim(0);
  SPWM_CHECK(static_cast<int>(b.size()) == co, "conv2d3x3: bias size ", b.size(),
             " vs ", co, " output channels");
  const int ho = (h + 2 - 3) / stride + 1, wo = (wd + 2 - 3) / stride + 1;
  std::vector<double> out(static_cast<size_t>(co) * ho * wo);
  conv_detail::fwd(out.data(), x.data(), w.data(), b.data(), ci, h, wd, co, ho, wo, stride);
  Tensor res({co, ho, wo}, std::move(out));
  In ix = input_of(x), iw = input_of(w), ib = input_of(b);
  if (ix.node < 0 && iw.node < 0 && ib.node < 0) return res;
  return finish(
      std::move(res), {ix.node, iw.node, ib.node},
      [ix, iw, ib, x, w, ci, h, wd, co, ho, wo, stride](const std::vector<double>& g, Tape& tp) {
        const double *px = x.data(), *pw = w.data();
        if (ib.node >= 0) {
          auto& gb = tp.grad_buf(ib.node, co);
          for (int oc = 0; oc < co; ++oc) {
            const double* gp = g.data() + static_cast<int64_t>(oc) * ho * wo;
            for (int i = 0; i < ho * wo; ++i) gb[static_cast<size_t>(oc)] += gp[i];
          }
        }
        if (iw.node >= 0) {
          auto& gw = tp.grad_buf(iw.node, iw.size);
          conv_detail::bwd_w(gw.data(), px, g.data(), ci, h, wd, co, ho, wo, stride);
        }
        if (ix.node >= 0) {
          auto& gx = tp.grad_buf(ix.node, ix.size);
          conv_detail::bwd_x(gx.data(), pw, g.data(), ci, h, wd, co, ho, wo, stride);
        }
      });
}

// ------------------------------------------------------------- masked softmax

Tensor masked_softmax(const Tensor& logits, const std::vector<uint8_t>& mask) {
  SPWM_CHECK(logits.ndim() == 2, "masked_softmax expects [N,S], got ",
             shape_str(logits.shape()));
  SPWM_CHECK(mask.size() == static_cast<size_t>(logits.size()),
             "masked_softmax: mask size ", mask.size(), " vs logits ", logits.size());
  const int rows = logits.dim(0), s = logits.dim(1);
  std::vector<double> out(static_cast<size_t>(logits.size()), 0.0);
  const double* pl = logits.data();
  for (int r = 0; r < rows; ++r) {
    const double* lrow = pl + static_cast<size_t>(r) * s;
    const uint8_t* mrow = mask.data() + static_cast<size_t>(r) * s;
    double mx = kNegInf;
    for (int j = 0; j < s; ++j)
      if (mrow[j] && lrow[j] > mx) mx = lrow[j];
    if (mx == kNegInf) continue;  // all-masked row stays zero
    double denom = 0;
    double* orow = out.data() + static_cast<size_t>(r) * s;
    for (int j = 0; j < s; ++j) {
      if (!mrow[j]) continue;
      orow[j] = std::exp(lrow[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < s; ++j)
      if (mrow[j]) orow[j] /= denom;
  }
  Tensor res(logits.shape(), std::move(out));
  In il = input_of(logits);
  if (il.node < 0) return res;
  return finish(std::move(res), {il.node},
                [il, res, mask, rows, s](const std::vector<double>& g, Tape& tp) {
                  auto& gl = tp.grad_buf(il.node, il.size);
                  const double* pa = res.data();
                  for (int r = 0; r < rows; ++r) {
                    const double* arow = pa + static_cast<size_t>(r) * s;
                    const double* grow = g.data() + static_cast<size_t>(r) * s;
                    const uint8_t* mrow = mask.data() + static_cast<size_t>(r) * s;
                    double dot = 0;
                    for (int j = 0; j < s; ++j)
                      if (mrow[j]) dot += arow[j] * grow[j];
                    for (int j = 0; j < s; ++j)
                      if (mrow[j]) gl[static_cast<size_t>(r) * s + j] += arow[j] * (grow[j] - dot);
                  }
                });
}

// ------------------------------------------------------------------ attention

namespace {

// Softmax of one score row; masked (-inf) entries are skipped, never read by
// the reduction, so outputs at unmasked positions are invariant to masked
// inputs bit-for-bit.
void softmax_row(double* row, const double* maskrow, int n) {
  double mx = kNegInf;
  for (int j = 0; j < n; ++j) {
    if (maskrow && maskrow[j] == kNegInf) continue;
    if (row[j] > mx) mx = row[j];
  }
  double denom = 0;
  for (int j = 0; j < n; ++j) {
    if (maskrow && maskrow[j] == kNegInf) {
      row[j] = 0;
      continue;
    }
    row[j] = std::exp(row[j] - mx);
    denom += row[j];
  }
  if (denom > 0)
    for (int j = 0; j < n; ++j) row[j] /= denom;
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int batch,
                 int heads, const Tensor* add_mask) {
  SPWM_CHECK(q.ndim() == 2 && k.ndim() == 2 && v.ndim() == 2,
             "attention: q,k,v must be 2-d");
  const int d = q.dim(1);
  SPWM_CHECK(k.dim(1) == d && v.dim(1) == d, "attention: dim mismatch");
  SPWM_CHECK(d % heads == 0, "attention: model dim ", d, " not divisible by ", heads, " heads");
  SPWM_CHECK(q.dim(0) % batch == 0 && k.dim(0) % batch == 0,
             "attention: rows not divisible by batch");
  SPWM_CHECK(k.dim(0) == v.dim(0), "attention: k/v row mismatch");
  const int tq = q.dim(0) / batch, tk = k.dim(0) / batch, dh = d / heads;
  if (add_mask) {
    SPWM_CHECK(add_mask->ndim() == 2 && add_mask->dim(0) == tq && add_mask->dim(1) == tk,
               "attention: mask shape ", shape_str(add_mask->shape()),
               " must be [", tq, ",", tk, "]");
  }
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const double* pm = add_mask ? add_mask->data() : nullptr;

  std::vector<double> out(static_cast<size_t>(q.size()), 0.0);
  const double *pq = q.data(), *pk = k.data(), *pv = v.data();
  parallel_for(static_cast<int64_t>(batch) * heads, [&](int64_t w0, int64_t w1) {
    std::vector<double> srow(static_cast<size_t>(tk));
    for (int64_t w = w0; w < w1; ++w) {
      const int b = static_cast<int>(w / heads), hh = static_cast<int>(w % heads);
      const int64_t qbase = static_cast<int64_t>(b) * tq, kbase = static_cast<int64_t>(b) * tk;
      for (int i = 0; i < tq; ++i) {
        const double* qrow = pq + (qbase + i) * d + hh * dh;
        const double* mrow = pm ? pm + static_cast<size_t>(i) * tk : nullptr;
        for (int j = 0; j < tk; ++j) {
          if (mrow && mrow[j] == kNegInf) {
            srow[static_cast<size_t>(j)] = kNegInf;
            continue;
          }
          const double* krow = pk + (kbase + j) * d + hh * dh;
          double s = 0;
          for (int p = 0; p < dh; ++p) s += qrow[p] * krow[p];
          srow[static_cast<size_t>(j)] = s * sc;
        }
        softmax_row(srow.data(), mrow, tk);
        double* orow = out.data() + (qbase + i) * d + hh * dh;
        for (int j = 0; j < tk; ++j) {
          const double a = srow[static_cast<size_t>(j)];
          if (a == 0.0) continue;
          const double* vrow = pv + (kbase + j) * d + hh * dh;
          for (int p = 0; p < dh; ++p) orow[p] += a * vrow[p];
        }
      }
    }
  });
  Tensor res(q.shape(), std::move(out));
  In iq = input_of(q), ik = input_of(k), iv = input_of(v);
  if (iq.node < 0 && ik.node < 0 && iv.node < 0) return res;
  Tensor mask_keep = add_mask ? *add_mask : Tensor();
  return finish(
      std::move(res), {iq.node, ik.node, iv.node},
      [iq, ik, iv, q, k, v, mask_keep, batch, heads, tq, tk, dh, d,
       sc](const std::vector<double>& g, Tape& tp) {
        const double *pq2 = q.data(), *pk2 = k.data(), *pv2 = v.data();
        const double* pm2 = mask_keep.defined() ? mask_keep.data() : nullptr;
        std::vector<double>* gq = iq.node >= 0 ? &tp.grad_buf(iq.node, iq.size) : nullptr;
        std::vector<double>* gk = ik.node >= 0 ? &tp.grad_buf(ik.node, ik.size) : nullptr;
        std::vector<double>* gv = iv.node >= 0 ? &tp.grad_buf(iv.node, iv.size) : nullptr;
        // Each (batch, head) slab owns disjoint regions of gq/gk/gv.
        parallel_for(static_cast<int64_t>(batch) * heads, [&](int64_t w0, int64_t w1) {
          std::vector<double> arow(static_cast<size_t>(tk)), da(static_cast<size_t>(tk));
          for (int64_t w = w0; w < w1; ++w) {
            const int b = static_cast<int>(w / heads), hh = static_cast<int>(w % heads);
            const int64_t qbase = static_cast<int64_t>(b) * tq, kbase = static_cast<int64_t>(b) * tk;
            for (int i = 0; i < tq; ++i) {
              const double* qrow = pq2 + (qbase + i) * d + hh * dh;
              const double* mrow = pm2 ? pm2 + static_cast<size_t>(i) * tk : nullptr;
              // recompute attention row
              for (int j = 0; j < tk; ++j) {
                if (mrow && mrow[j] == kNegInf) {
                  arow[static_cast<size_t>(j)] = kNegInf;
                  continue;
                }
                const double* krow = pk2 + (kbase + j) * d + hh * dh;
                double s = 0;
                for (int p = 0; p < dh; ++p) s += qrow[p] * krow[p];
                arow[static_cast<size_t>(j)] = s * sc;
              }
              softmax_row(arow.data(), mrow, tk);
              const double* grow = g.data() + (qbase + i) * d + hh * dh;
              double dot = 0;
              for (int j = 0; j < tk; ++j) {
                if (mrow && mrow[j] == kNegInf) {
                  da[static_cast<size_t>(j)] = 0;
                  continue;
                }
                const double* vrow = pv2 + (kbase + j) * d + hh * dh;
                double s = 0;
                for (int p = 0; p < dh; ++p) s += grow[p] * vrow[p];
                da[static_cast<size_t>(j)] = s;
                dot += arow[static_cast<size_t>(j)] * s;
                if (gv) {
                  double* gvrow = gv->data() + (kbase + j) * d + hh * dh;
                  const double a = arow[static_cast<size_t>(j)];
                  for (int p = 0; p < dh; ++p) gvrow[p] += a * grow[p];
                }
              }
              for (int j = 0; j < tk; ++j) {
                if (mrow && mrow[j] == kNegInf) continue;
                const double ds = arow[static_cast<size_t>(j)] * (da[static_cast<size_t>(j)] - dot) * sc;
                if (ds == 0.0) continue;
                const double* krow = pk2 + (kbase + j) * d + hh * dh;
                if (gq) {
                  double* gqrow = gq->data() + (qbase + i) * d + hh * dh;
                  for (int p = 0; p < dh; ++p) gqrow[p] += ds * krow[p];
                }
                if (gk) {
                  double* gkrow = gk->data() + (kbase + j) * d + hh * dh;
                  for (int p = 0; p < dh; ++p) gkrow[p] += ds * qrow[p];
                }
              }
            }
          }
        });
      });
}

// ------------------------------------------------------------ bilinear sample

Tensor bilinear_sample(const Tensor& f, const std::vector<double>& uv) {
  SPWM_CHECK(f.ndim() == 3, "bilinear_sample: feature map must be [C,h,w], got ",
             shape_str(f.shape()));
  SPWM_CHECK(uv.size() % 2 == 0, "bilinear_sample: uv list must be (u,v) pairs");
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  const int m = static_cast<int>(uv.size() / 2);
  const int64_t plane = static_cast<int64_t>(h) * w;
  std::vector<double> out(static_cast<size_t>(m) * c);
  // 4 taps and weights per sample, shared with the backward pass.
  std::vector<int> taps(static_cast<size_t>(m) * 4);
  std::vector<double> wts(static_cast<size_t>(m) * 4);
  const double* pf = f.data();
  for (int i = 0; i < m; ++i) {
    double u = uv[static_cast<size_t>(i) * 2], v = uv[static_cast<size_t>(i) * 2 + 1];
    u = std::min(std::max(u, 0.0), static_cast<double>(w - 1));
    v = std::min(std::max(v, 0.0), static_cast<double>(h - 1));
    const int x0 = std::min(static_cast<int>(std::floor(u)), w - 1);
    const int y0 = std::min(static_cast<int>(std::floor(v)), h - 1);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double du = u - x0, dv = v - y0;
    const int base = i * 4;
    taps[static_cast<size_t>(base)] = y0 * w + x0;
    taps[static_cast<size_t>(base) + 1] = y0 * w + x1;
    taps[static_cast<size_t>(base) + 2] = y1 * w + x0;
    taps[static_cast<size_t>(base) + 3] = y1 * w + x1;
    wts[static_cast<size_t>(base)] = (1 - du) * (1 - dv);
    wts[static_cast<size_t>(base) + 1] = du * (1 - dv);
    wts[static_cast<size_t>(base) + 2] = (1 - du) * dv;
    wts[static_cast<size_t>(base) + 3] = du * dv;
    for (int ch = 0; ch < c; ++ch) {
      const double* fp = pf + ch * plane;
      double s = 0;
      for (int t = 0; t < 4; ++t)
        s += wts[static_cast<size_t>(base) + t] * fp[taps[static_cast<size_t>(base) + t]];
      out[static_cast<size_t>(i) * c + ch] = s;
    }
  }
  Tensor res({m, c}, std::move(out));
  In ifm = input_of(f);
  if (ifm.node < 0) return res;
  return finish(std::move(res), {ifm.node},
                [ifm, taps, wts, m, c, plane](const std::vector<double>& g, Tape& tp) {
                  auto& gf = tp.grad_buf(ifm.node, ifm.size);
                  for (int i = 0; i < m; ++i) {
                    const int base = i * 4;
                    for (int ch = 0; ch < c; ++ch) {
                      const double gv = g[static_cast<size_t>(i) * c + ch];
                      if (gv == 0.0) continue;
                      double* fp = gf.data() + ch * plane;
                      for (int t = 0; t < 4; ++t)
                        fp[taps[static_cast<size_t>(base) + t]] += gv * wts[static_cast<size_t>(base) + t];
                    }
                  }
                });
}

// --------------------------------------------------------------- weighted sum

Tensor weighted_sum(const Tensor& w, const Tensor& f) {
  SPWM_CHECK(w.ndim() == 2 && f.ndim() == 2, "weighted_sum: w [N,S], f [N*S,D]");
  const int n = w.dim(0), s = w.dim(1), d = f.dim(1);
  SPWM_CHECK(f.dim(0) == n * s, "weighted_sum: f rows ", f.dim(0), " vs N*S ", n * s);
  std::vector<double> out(static_cast<size_t>(n) * d, 0.0);
  const double *pw = w.data(), *pf = f.data();
  for (int i = 0; i < n; ++i) {
    double* orow = out.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < s; ++j) {
      const double wv = pw[static_cast<size_t>(i) * s + j];
      if (wv == 0.0) continue;
      const double* frow = pf + (static_cast<size_t>(i) * s + j) * d;
      for (int p = 0; p < d; ++p) orow[p] += wv * frow[p];
    }
  }
  Tensor res({n, d}, std::move(out));
  In iw = input_of(w), ifr = input_of(f);
  if (iw.node < 0 && ifr.node < 0) return res;
  return finish(std::move(res), {iw.node, ifr.node},
                [iw, ifr, w, f, n, s, d](const std::vector<double>& g, Tape& tp) {
                  const double *pw2 = w.data(), *pf2 = f.data();
                  if (iw.node >= 0) {
                    auto& gw = tp.grad_buf(iw.node, iw.size);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < s; ++j) {
                        const double* frow = pf2 + (static_cast<size_t>(i) * s + j) * d;
                        const double* grow = g.data() + static_cast<size_t>(i) * d;
                        double acc = 0;
                        for (int p = 0; p < d; ++p) acc += frow[p] * grow[p];
                        gw[static_cast<size_t>(i) * s + j] += acc;
                      }
                  }
                  if (ifr.node >= 0) {
                    auto& gf = tp.grad_buf(ifr.node, ifr.size);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < s; ++j) {
                        const double wv = pw2[static_cast<size_t>(i) * s + j];
                        if (wv == 0.0) continue;
                        double* frow = gf.data() + (static_cast<size_t>(i) * s + j) * d;
                        const double* grow = g.data() + static_cast<size_t>(i) * d;
                        for (int p = 0; p < d; ++p) frow[p] += wv * grow[p];
                      }
                  }
                });
}

}  // namespace spwm::numcore

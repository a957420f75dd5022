#pragma once

// Scalar view of the tensor tape: each AScalar wraps a 1-element Tensor, so
// scalar-granularity code (e.g. the reference rasterizer) can be
// differentiated through the same machinery as tensor code. Slow by design;
// test-scale inputs only.

#include <cmath>

#include "numcore/ops.hpp"

namespace spwm::numcore {

struct AScalar {
  Tensor t;

  AScalar() : t(Tensor::scalar(0.0)) {}
  AScalar(double v) : t(Tensor::scalar(v)) {}  // NOLINT implicit by intent
  explicit AScalar(Tensor tt) : t(std::move(tt)) {}

  double value() const { return t.data()[0]; }

  AScalar operator-() const { return AScalar(neg(t)); }
  AScalar& operator+=(const AScalar& o) {
    t = add(t, o.t);
    return *this;
  }
  AScalar& operator*=(const AScalar& o) {
    t = mul(t, o.t);
    return *this;
  }
};

inline AScalar operator+(const AScalar& a, const AScalar& b) { return AScalar(add(a.t, b.t)); }
inline AScalar operator-(const AScalar& a, const AScalar& b) { return AScalar(sub(a.t, b.t)); }
inline AScalar operator*(const AScalar& a, const AScalar& b) { return AScalar(mul(a.t, b.t)); }
inline AScalar operator/(const AScalar& a, const AScalar& b) { return AScalar(div(a.t, b.t)); }

inline AScalar exp(const AScalar& a) { return AScalar(exp(a.t)); }
inline AScalar sqrt(const AScalar& a) { return AScalar(sqrt(a.t)); }

// Clamp-from-above with zero gradient on the clamped branch.
inline AScalar min_const(const AScalar& a, double c) {
  return a.value() < c ? a : AScalar(c);
}
inline double scalar_value(const AScalar& a) { return a.value(); }
inline double scalar_value(double a) { return a; }
inline double min_const(double a, double c) { return a < c ? a : c; }

}  // namespace spwm::numcore

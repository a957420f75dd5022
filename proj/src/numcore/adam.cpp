#include "numcore/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace spwm::numcore {

void Adam::step(ParamSet& params, Tape& tape) {
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& p : params.items()) {
    if (!p.trainable) continue;
    const std::vector<double> g = tape.grad(p.leaf);
    auto& mo = moments_[p.name];
    const size_t n = static_cast<size_t>(p.value.size());
    if (mo.m.empty()) {
      mo.m.assign(n, 0.0);
      mo.v.assign(n, 0.0);
    }
    auto& vals = p.value.mutable_values();
    for (size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      SPWM_CHECK(std::isfinite(gi), "non-finite gradient in parameter '", p.name,
                 "' at element ", i);
      mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * gi;
      mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = mo.m[i] / bc1;
      const double vhat = mo.v[i] / bc2;
      vals[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace spwm::numcore

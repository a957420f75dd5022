#pragma once

// Central finite-difference gradient oracle shared by the test suites. Stays
// independent of the tape: it only re-evaluates a scalar-valued function
// after perturbing parameter entries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "numcore/params.hpp"
#include "numcore/rng.hpp"
#include "numcore/tape.hpp"

namespace spwm::testutil {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  std::string worst;  // "param[idx] analytic=.. fd=.."
};

// Compares the tape gradient of `loss_fn` against central finite differences
// on `samples` randomly chosen parameter entries. `loss_fn` must rebuild its
// forward pass from the current parameter values on the active tape (or with
// no tape for the FD evaluations).
inline GradCheckResult gradcheck(
    numcore::ParamSet& params,
    const std::function<numcore::Tensor()>& loss_fn, int samples,
    numcore::Rng& rng, double h = 1e-5) {
  using namespace numcore;
  GradCheckResult res;

  // Analytic gradients.
  Tape tape;
  std::vector<std::vector<double>> analytic;
  {
    Tape::Scope scope(tape);
    params.bind(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
    for (auto& p : params.items()) analytic.push_back(tape.grad(p.leaf));
  }
  params.bind_frozen();

  std::vector<Param*> trainable;
  for (auto& p : params.items())
    if (p.trainable) trainable.push_back(&p);

  for (int s = 0; s < samples; ++s) {
    const size_t pi = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(trainable.size())));
    Param* p = trainable[pi];
    const size_t ei = static_cast<size_t>(rng.uniform_int(p->value.size()));
    auto& vals = p->value.mutable_values();
    const double orig = vals[ei];
    const double step = h * std::max(1.0, std::fabs(orig));

    vals[ei] = orig + step;
    p->leaf = p->value.detached();
    const double lp = loss_fn().item();
    vals[ei] = orig - step;
    p->leaf = p->value.detached();
    const double lm = loss_fn().item();
    vals[ei] = orig;
    p->leaf = p->value.detached();

    const double fd = (lp - lm) / (2.0 * step);
    size_t idx = 0;
    for (auto& q : params.items()) {
      if (&q == p) break;
      ++idx;
    }
    const double an = analytic[idx][ei];
    const double denom = std::max(1e-6, std::fabs(an) + std::fabs(fd));
    const double rel = std::fabs(an - fd) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst = p->name + "[" + std::to_string(ei) + "] analytic=" +
                  std::to_string(an) + " fd=" + std::to_string(fd);
    }
    res.checked++;
  }
  return res;
}

}  // namespace spwm::testutil

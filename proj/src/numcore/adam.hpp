#pragma once

#include <unordered_map>

#include "numcore/params.hpp"

namespace spwm::numcore {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. Moment tensors mirror their parameter
// shapes. Throws ContractError naming the parameter if a gradient is not
// finite.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update using gradients recorded on `tape` for the bound
  // leaves of `params` (non-trainable entries are skipped).
  void step(ParamSet& params, Tape& tape);

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  int64_t step_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace spwm::numcore

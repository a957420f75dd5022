#pragma once

#include <deque>
#include <string>
#include <vector>

#include "numcore/rng.hpp"
#include "numcore/tape.hpp"
#include "numcore/tensor.hpp"

namespace spwm::numcore {

// One named parameter. `value` is the persistent storage; `leaf` is the
// tape handle refreshed by ParamSet::bind before each forward pass.
struct Param {
  std::string name;
  Tensor value;
  Tensor leaf;
  bool trainable = true;
};

class ParamSet {
 public:
  Param* add(const std::string& name, Tensor init, bool trainable = true);
  Param* add_normal(const std::string& name, Shape shape, Rng& rng, double stddev);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;

  // Registers every parameter as a leaf on the tape.
  void bind(Tape& tape);
  // Detached handles for inference (no gradient tracking).
  void bind_frozen();

  std::deque<Param>& items() { return params_; }
  const std::deque<Param>& items() const { return params_; }
  int64_t total_size() const;

  // FNV-1a over names, shapes and payload bytes; used by determinism checks.
  uint64_t content_hash() const;

 private:
  std::deque<Param> params_;  // stable addresses
};

}  // namespace spwm::numcore

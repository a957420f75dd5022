#pragma once

#include <functional>
#include <vector>

#include "numcore/tensor.hpp"

namespace spwm::numcore {

// Dynamic reverse-mode tape. Nodes are recorded in execution order, so the
// node list is already topologically sorted: every parent precedes its
// consumers, and the backward sweep visits each node exactly once by walking
// indices in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<double>& out_grad, Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII activation; ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(Tape& t) : prev_(current_) { current_ = &t; }
    ~Scope() { current_ = prev_; }
    Scope(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* current() { return current_; }

  // Registers a leaf (shares the payload, no backward).
  Tensor leaf(const Tensor& value) {
    const int id = record({}, nullptr);
    return value.with_node(id, this);
  }

  int record(std::vector<int> parents, BackwardFn fn) {
    nodes_.push_back(Node{std::move(parents), std::move(fn)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  size_t node_count() const { return nodes_.size(); }

  void backward(const Tensor& loss);

  // Gradient buffer for a node; allocates zeros of the given size on first use.
  std::vector<double>& grad_buf(int node, int64_t n) {
    auto& g = grads_[static_cast<size_t>(node)];
    if (g.empty() && n > 0) g.assign(static_cast<size_t>(n), 0.0);
    return g;
  }

  bool has_grad(const Tensor& t) const {
    return t.node() >= 0 && t.tape_tag() == this &&
           static_cast<size_t>(t.node()) < grads_.size() &&
           !grads_[static_cast<size_t>(t.node())].empty();
  }

  // Gradient of the last backward() wrt a tensor recorded on this tape.
  // Returns zeros if the tensor did not contribute to the loss.
  std::vector<double> grad(const Tensor& t) const {
    SPWM_CHECK(t.node() >= 0 && t.tape_tag() == this,
               "grad() queried for a tensor not on this tape");
    const auto& g = grads_[static_cast<size_t>(t.node())];
    if (g.empty()) return std::vector<double>(static_cast<size_t>(t.size()), 0.0);
    return g;
  }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;

  static thread_local Tape* current_;
};

// True if gradients should be tracked through this tensor right now.
inline bool tracked(const Tensor& t) {
  return Tape::current() != nullptr && t.node() >= 0 &&
         t.tape_tag() == Tape::current();
}

}  // namespace spwm::numcore

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace spwm::numcore {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

// Immutable row-major f64 tensor. Copies are cheap (shared payload).
// A tensor may carry a node id on the currently active Tape, in which case
// gradients flow through it during Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(numel(shape_), 0.0)) {}
  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(std::move(values))) {
    SPWM_CHECK(static_cast<int64_t>(data_->size()) == numel(shape_),
               "tensor data size ", data_->size(), " does not match shape ",
               shape_str(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.mutable_values()) x = v;
    return t;
  }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  const std::vector<double>& values() const { return *data_; }
  const double* data() const { return data_->data(); }

  double item() const {
    SPWM_CHECK(size() == 1, "item() requires a scalar, shape is ", shape_str(shape_));
    return (*data_)[0];
  }

  int node() const { return node_; }
  const void* tape_tag() const { return tape_tag_; }

  // Mutation hatch for construction-time fills and the optimizer. Callers
  // must only touch tensors they exclusively own.
  std::vector<double>& mutable_values() { return *data_; }

  Tensor with_node(int node, const void* tag) const {
    Tensor t = *this;
    t.node_ = node;
    t.tape_tag_ = tag;
    return t;
  }
  Tensor detached() const {
    Tensor t = *this;
    t.node_ = -1;
    t.tape_tag_ = nullptr;
    return t;
  }

  Tensor reshaped(Shape s) const {
    SPWM_CHECK(numel(s) == size(), "reshape from ", shape_str(shape_), " to ",
               shape_str(s), " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(s);
    return t;
  }

  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  int node_ = -1;
  const void* tape_tag_ = nullptr;
};

}  // namespace spwm::numcore

#include "numcore/tape.hpp"

#include <cmath>

namespace spwm::numcore {

thread_local Tape* Tape::current_ = nullptr;

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

bool Tensor::all_finite() const {
  if (!data_) return true;
  for (double v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tape::backward(const Tensor& loss) {
  SPWM_CHECK(loss.size() == 1, "backward requires a scalar loss, shape is ",
             shape_str(loss.shape()));
  SPWM_CHECK(loss.node() >= 0 && loss.tape_tag() == this,
             "backward: loss is not recorded on this tape");
  grads_.assign(nodes_.size(), {});
  grad_buf(loss.node(), 1)[0] = 1.0;
  for (int i = loss.node(); i >= 0; --i) {
    const auto& g = grads_[static_cast<size_t>(i)];
    if (g.empty()) continue;  // node does not influence the loss
    const Node& n = nodes_[static_cast<size_t>(i)];
    if (n.backward) n.backward(g, *this);
  }
}

}  // namespace spwm::numcore

#include "numcore/params.hpp"

#include <cstring>

#include "common/error.hpp"

namespace spwm::numcore {

Param* ParamSet::add(const std::string& name, Tensor init, bool trainable) {
  SPWM_CHECK(find(name) == nullptr, "duplicate parameter name '", name, "'");
  params_.push_back(Param{name, std::move(init), Tensor(), trainable});
  Param& p = params_.back();
  p.leaf = p.value;
  return &p;
}

Param* ParamSet::add_normal(const std::string& name, Shape shape, Rng& rng, double stddev) {
  return add(name, Tensor(shape, rng.normal_vec(numel(shape), stddev)));
}

Param* ParamSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Param* ParamSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParamSet::bind(Tape& tape) {
  for (auto& p : params_) p.leaf = tape.leaf(p.value);
}

void ParamSet::bind_frozen() {
  for (auto& p : params_) p.leaf = p.value.detached();
}

int64_t ParamSet::total_size() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

uint64_t ParamSet::content_hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    for (int d : p.value.shape()) mix(&d, sizeof(d));
    mix(p.value.data(), sizeof(double) * static_cast<size_t>(p.value.size()));
  }
  return h;
}

}  // namespace spwm::numcore

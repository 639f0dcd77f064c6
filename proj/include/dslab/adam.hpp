#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dslab/rng.hpp"
#include "dslab/tensor.hpp"

namespace dslab {

// Named trainable tensors in a fixed registration order. The order defines
// the serialization layout and the optimizer's update order.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t) {
    if (by_name_.count(name)) throw Error("ParamStore: duplicate parameter " + name);
    t.set_requires_grad(true);
    names_.push_back(name);
    by_name_.emplace(name, t);
    return t;
  }

  Tensor& at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("ParamStore: unknown parameter " + name);
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("ParamStore: unknown parameter " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return by_name_.count(name) > 0; }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& name : names_) n += at(name).size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> by_name_;
};

// gradient buffers aligned with a ParamStore
using GradMap = std::unordered_map<std::string, std::vector<double>>;

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  // parameters whose update was skipped because of a non-finite gradient
  std::int64_t skipped_nonfinite = 0;
  std::unordered_map<std::string, std::vector<double>> m;
  std::unordered_map<std::string, std::vector<double>> v;
};

// Bias-corrected Adam with decoupled additive weight decay
// (param -= lr * wd * param). A parameter with a non-finite gradient keeps
// its value and moments for this step; the event is counted.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state);

// Standard Gumbel noise -log(-log(U)); deterministic under the seed.
// `temperature` is validated here because the only consumer is the noisy
// softmax softmax((logits + noise) / temperature).
Tensor sample_gumbel(const Shape& shape, std::uint64_t seed, double temperature);
Tensor sample_gumbel(const Shape& shape, Rng& rng);

// He-style scaled normal init for weight matrices
Tensor init_weight(std::size_t in_dim, std::size_t out_dim, Rng& rng);

}  // namespace dslab

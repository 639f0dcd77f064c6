#include "dslab/adam.hpp"

#include <cmath>

namespace dslab {

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state) {
  state.step += 1;
  double t = static_cast<double>(state.step);
  double bc1 = 1.0 - std::pow(state.beta1, t);
  double bc2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& name : params.names()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;  // parameter not part of this update (e.g. frozen)
    Tensor& p = params.at(name);
    const std::vector<double>& g = git->second;
    if (g.size() != p.size())
      throw Error("adam_step: gradient size mismatch for " + name);
    bool finite = true;
    for (double gv : g)
      if (!std::isfinite(gv)) {
        finite = false;
        break;
      }
    if (!finite) {
      state.skipped_nonfinite += 1;
      continue;
    }
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    auto& pv = p.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      pv[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * pv[i]);
    }
  }
}

Tensor sample_gumbel(const Shape& shape, std::uint64_t seed, double temperature) {
  if (temperature <= 0.0) throw Error("sample_gumbel: temperature must be positive");
  Rng rng(seed);
  return sample_gumbel(shape, rng);
}

Tensor sample_gumbel(const Shape& shape, Rng& rng) {
  Tensor out = Tensor::zeros(shape);
  for (auto& v : out.values()) v = rng.gumbel();
  return out;
}

Tensor init_weight(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  Tensor w = Tensor::zeros({in_dim, out_dim});
  double s = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (auto& v : w.values()) v = s * rng.normal();
  return w;
}

}  // namespace dslab

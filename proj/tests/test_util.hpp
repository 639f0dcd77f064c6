#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dslab/ops.hpp"
#include "dslab/rng.hpp"

namespace dslab::testing {

// forward builder: evaluates the graph and returns a scalar loss
using ScalarFn = std::function<Tensor(Tape*, const std::vector<Tensor>&)>;

struct FdReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

inline double rel_err(double a, double b) {
  double m = std::max(std::abs(a), std::abs(b));
  if (m < 1e-6) return std::abs(a - b) <= 1e-8 ? 0.0 : 1.0;
  return std::abs(a - b) / m;
}

// Central finite differences against reverse-mode gradients for every
// element of every requires_grad input. The oracle path reruns the forward
// without a tape, so it is independent of the backward rules it checks.
inline FdReport check_gradients(const ScalarFn& f, std::vector<Tensor> inputs, double h = 1e-5) {
  Tape tape;
  Tensor loss = f(&tape, inputs);
  tape.backward(loss);
  FdReport rep;
  for (auto& x : inputs) {
    if (!x.requires_grad()) continue;
    std::vector<double> analytic = x.grad();
    if (analytic.empty()) analytic.assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double orig = x.values()[i];
      x.values()[i] = orig + h;
      double fp = f(nullptr, inputs).item();
      x.values()[i] = orig - h;
      double fm = f(nullptr, inputs).item();
      x.values()[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      rep.max_rel = std::max(rep.max_rel, rel_err(fd, analytic[i]));
      rep.checked += 1;
    }
  }
  return rep;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// keeps |x| away from the relu/abs kinks so central differences stay valid
inline Tensor random_tensor_away_from_zero(Shape shape, Rng& rng, double min_abs = 1e-2) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (auto& v : t.values())
    while (std::abs(v) < min_abs) v = rng.uniform(-2.0, 2.0);
  return t;
}

}  // namespace dslab::testing

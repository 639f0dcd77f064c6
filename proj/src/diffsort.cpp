#include "dslab/diffsort.hpp"

#include <algorithm>
#include <numeric>

namespace dslab {

std::size_t SoftPermutation::position_of(std::size_t index) const {
  if (!hard) throw Error("SoftPermutation::position_of: hard mode only");
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] == index) return i;
  throw Error("SoftPermutation::position_of: index not present");
}

SoftPermutation soft_sort(Tape* t, const Tensor& ranks, double tau) {
  if (tau <= 0.0) throw Error("soft_sort: tau must be positive");
  std::size_t n = ranks.size();
  if (n == 0) throw Error("soft_sort: empty rank vector");
  // view ranks as a column {N,1}
  Tensor o = ranks;
  if (ranks.rows() != n) {
    o = ops::transpose(t, ranks);
  }
  std::vector<double> ones_v(n, 1.0);
  Tensor ones_row = Tensor::row(ones_v);
  Tensor ones_col = Tensor::col(ones_v);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i)
    c[i] = static_cast<double>(n) + 1.0 - 2.0 * static_cast<double>(i + 1);
  Tensor c_col = Tensor::col(c);

  Tensor spread = ops::matmul(t, o, ones_row);                 // [j][k] = o_j
  Tensor diffs = ops::sub(t, spread, ops::transpose(t, spread));  // o_j - o_k
  Tensor s = ops::sum_rows(t, ops::abs(t, diffs));             // s_j = sum_k |o_j - o_k|
  Tensor l1 = ops::matmul(t, c_col, ops::transpose(t, ops::neg(t, o)));
  Tensor l2 = ops::matmul(t, ones_col, ops::transpose(t, s));
  Tensor logits = ops::scale(t, ops::sub(t, l1, l2), 1.0 / tau);

  SoftPermutation p;
  p.matrix = ops::softmax_rows(t, logits);
  p.hard = false;
  p.tau = tau;
  return p;
}

SoftPermutation hard_sort(const std::vector<double>& ranks) {
  std::size_t n = ranks.size();
  if (n == 0) throw Error("hard_sort: empty rank vector");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
  SoftPermutation p;
  p.hard = true;
  p.perm = std::move(idx);
  Tensor m = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) m.at(i, p.perm[i]) = 1.0;
  p.matrix = m;
  return p;
}

SoftPermutation hard_sort(const Tensor& ranks) { return hard_sort(ranks.values()); }

Tensor apply_permutation(Tape* t, const SoftPermutation& p, const Tensor& d) {
  std::size_t n = p.size();
  if (d.rows() != n)
    throw Error("apply_permutation: permutation " + shape_str(p.matrix.shape()) +
                " does not match data " + shape_str(d.shape()));
  if (p.hard) {
    Tensor out = Tensor::zeros({n, d.cols()});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d.cols(); ++c) out.at(i, c) = d.at(p.perm[i], c);
    return out;
  }
  return ops::matmul(t, p.matrix, d);
}

double sortedness(const SoftPermutation& p, const std::vector<double>& values) {
  if (!p.hard) throw Error("sortedness: requires a hard permutation");
  if (p.perm.size() != values.size()) throw Error("sortedness: size mismatch");
  SoftPermutation truth = hard_sort(values);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.perm.size(); ++i)
    if (p.perm[i] == truth.perm[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(values.size());
}

}  // namespace dslab

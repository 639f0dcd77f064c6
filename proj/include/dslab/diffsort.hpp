#pragma once

#include <vector>

#include "dslab/ops.hpp"

namespace dslab {

// Relaxed or exact permutation produced from per-element rank scalars.
// Row i of the matrix holds the selection weights for output position i
// (ascending order: position 0 targets the smallest rank). In hard mode
// perm[i] is the original index placed at position i and the matrix is the
// corresponding 0/1 permutation matrix.
struct SoftPermutation {
  Tensor matrix;
  bool hard = false;
  double tau = 1.0;
  std::vector<std::size_t> perm;  // hard mode only

  std::size_t size() const { return matrix.rows(); }

  // position of original element `index` in the sorted order (hard mode)
  std::size_t position_of(std::size_t index) const;
};

// Unimodal row-stochastic relaxation: row i has logits
// ((N + 1 - 2(i+1)) * (-o_j) - sum_k |o_j - o_k|) / tau followed by a row
// softmax. As tau -> 0 with distinct ranks it converges to the ascending
// argsort permutation. Differentiable wrt the ranks tensor (shape {N,1}).
SoftPermutation soft_sort(Tape* t, const Tensor& ranks, double tau);

// Exact ascending argsort; ties broken by smaller original index.
SoftPermutation hard_sort(const std::vector<double>& ranks);
SoftPermutation hard_sort(const Tensor& ranks);

// P * D. Hard mode reorders rows exactly (no arithmetic).
Tensor apply_permutation(Tape* t, const SoftPermutation& p, const Tensor& d);

// Fraction of rows of P*D sitting at their true ascending position; 1-D data
// only, hard permutations only.
double sortedness(const SoftPermutation& p, const std::vector<double>& values);

}  // namespace dslab

#pragma once

#include <string>
#include <vector>

#include "dslab/tape.hpp"
#include "dslab/tensor.hpp"

namespace dslab::ops {

// Toggle for the non-finite input guard on every primitive. On by default;
// the guard is linear in the input size and negligible next to matmul.
extern bool finite_checks;

// Elementwise binaries broadcast the second operand when it is a scalar, a
// single row {1,n} or a single column {m,1}.
Tensor matmul(Tape* t, const Tensor& a, const Tensor& b);
Tensor transpose(Tape* t, const Tensor& a);
Tensor add(Tape* t, const Tensor& a, const Tensor& b);
Tensor sub(Tape* t, const Tensor& a, const Tensor& b);
Tensor mul(Tape* t, const Tensor& a, const Tensor& b);
Tensor div(Tape* t, const Tensor& a, const Tensor& b);
Tensor neg(Tape* t, const Tensor& a);
Tensor abs(Tape* t, const Tensor& a);
Tensor relu(Tape* t, const Tensor& a);
Tensor exp(Tape* t, const Tensor& a);
Tensor log(Tape* t, const Tensor& a);
Tensor scale(Tape* t, const Tensor& a, double c);

Tensor softmax_rows(Tape* t, const Tensor& a);
Tensor layer_norm(Tape* t, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor concat_rows(Tape* t, const Tensor& a, const Tensor& b);
Tensor concat_cols(Tape* t, const Tensor& a, const Tensor& b);
Tensor slice_rows(Tape* t, const Tensor& a, std::size_t r0, std::size_t r1);
Tensor slice_cols(Tape* t, const Tensor& a, std::size_t c0, std::size_t c1);

Tensor sum_all(Tape* t, const Tensor& a);
Tensor mean_all(Tape* t, const Tensor& a);
Tensor sum_rows(Tape* t, const Tensor& a);  // {m,n} -> {m,1}
Tensor sum_cols(Tape* t, const Tensor& a);  // {m,n} -> {1,n}

// Stable -log softmax(logits)[target] for a {1,n} logit row.
Tensor cross_entropy_logits(Tape* t, const Tensor& logits, std::size_t target);

// mean((a-b)^2), composed from primitives
Tensor mse(Tape* t, const Tensor& a, const Tensor& b);

// softmax((logits + noise) / temperature); noise is a constant tensor
Tensor noisy_softmax(Tape* t, const Tensor& logits, const Tensor& noise, double temperature);

// Uniform dispatch over every primitive; used by the finite-difference
// harness so coverage of the op set is enumerable.
enum class OpKind {
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Abs,
  Relu,
  Exp,
  Log,
  Scale,
  SoftmaxRows,
  LayerNorm,
  ConcatRows,
  ConcatCols,
  SliceRows,
  SliceCols,
  SumAll,
  MeanAll,
  SumRows,
  SumCols,
  CrossEntropyLogits,
};

struct OpAttrs {
  double scale = 1.0;
  double eps = 1e-5;
  std::size_t i0 = 0, i1 = 0;  // slice bounds
  std::size_t target = 0;      // cross-entropy index
};

const std::vector<OpKind>& all_op_kinds();
const char* op_name(OpKind k);
Tensor forward(Tape* t, OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs = {});

}  // namespace dslab::ops

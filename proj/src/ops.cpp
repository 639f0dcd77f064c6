#include "dslab/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dslab::ops {

bool finite_checks = true;

namespace {

void check_inputs(const char* op, std::initializer_list<Tensor> ins) {
  if (!finite_checks) return;
  for (const auto& t : ins) {
    if (!t.all_finite()) throw Error(std::string(op) + ": non-finite input");
  }
}

Tensor make_out(std::size_t r, std::size_t c) { return Tensor::zeros({r, c}); }

Tensor finish(Tape* t, const char* op, std::initializer_list<Tensor> ins, Tensor out,
              std::function<void(Tape::Node&)> bw) {
  bool rg = false;
  for (const auto& i : ins) rg = rg || i.requires_grad();
  out.set_requires_grad(rg);
  if (t && t->recording && rg) {
    std::vector<std::shared_ptr<TensorData>> in_data;
    in_data.reserve(ins.size());
    for (const auto& i : ins) in_data.push_back(i.data());
    t->record(op, std::move(in_data), out.data(), std::move(bw));
  }
  return out;
}

enum class Bc { Same, Scalar, Row, Col };

Bc broadcast_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bc::Same;
  if (b.size() == 1) return Bc::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bc::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bc::Col;
  throw Error(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
}

std::size_t b_index(Bc m, std::size_t r, std::size_t c, std::size_t bc) {
  switch (m) {
    case Bc::Same: return r * bc + c;
    case Bc::Scalar: return 0;
    case Bc::Row: return c;
    case Bc::Col: return r;
  }
  return 0;
}

// generic broadcasting binary with per-element value and partials
template <typename F>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f) {
  check_inputs(op, {a, b});
  Bc mode = broadcast_mode(op, a, b);
  std::size_t R = a.rows(), C = a.cols();
  std::size_t bc = b.cols();
  Tensor out = make_out(R, C);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t i = r * C + c;
      po[i] = f(pa[i], pb[b_index(mode, r, c, bc)]);
    }
  return out;
}

}  // namespace

Tensor matmul(Tape* t, const Tensor& a, const Tensor& b) {
  check_inputs("matmul", {a, b});
  std::size_t M = a.rows(), K = a.cols(), N = b.cols();
  if (b.rows() != K)
    throw Error("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
  Tensor out = make_out(M, N);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      double av = pa[i * K + k];
      if (av == 0.0) continue;
      const double* brow = pb + k * N;
      double* orow = po + i * N;
      for (std::size_t j = 0; j < N; ++j) orow[j] += av * brow[j];
    }
  }
  return finish(t, "matmul", {a, b}, out, [M, K, N](Tape::Node& n) {
    const auto& g = n.output->grad;
    const auto& av = n.inputs[0]->values;
    const auto& bv = n.inputs[1]->values;
    if (n.inputs[0]->requires_grad) {
      auto& ga = n.inputs[0]->grad;
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          double gv = g[i * N + j];
          if (gv == 0.0) continue;
          for (std::size_t k = 0; k < K; ++k) ga[i * K + k] += gv * bv[k * N + j];
        }
    }
    if (n.inputs[1]->requires_grad) {
      auto& gb = n.inputs[1]->grad;
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          double av_ik = av[i * K + k];
          if (av_ik == 0.0) continue;
          for (std::size_t j = 0; j < N; ++j) gb[k * N + j] += av_ik * g[i * N + j];
        }
    }
  });
}

Tensor transpose(Tape* t, const Tensor& a) {
  check_inputs("transpose", {a});
  std::size_t R = a.rows(), C = a.cols();
  Tensor out = make_out(C, R);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out.at(c, r) = a.at(r, c);
  return finish(t, "transpose", {a}, out, [R, C](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[c * R + r];
  });
}

namespace {

// shared backward for broadcasting binaries; fa/fb give partials wrt a and b
template <typename FA, typename FB>
std::function<void(Tape::Node&)> binary_backward(const char* op, const Tensor& a, const Tensor& b,
                                                 FA fa, FB fb) {
  Bc mode = broadcast_mode(op, a, b);
  std::size_t R = a.rows(), C = a.cols(), bc = b.cols();
  return [mode, R, C, bc, fa, fb](Tape::Node& n) {
    const auto& g = n.output->grad;
    const auto& av = n.inputs[0]->values;
    const auto& bv = n.inputs[1]->values;
    bool need_a = n.inputs[0]->requires_grad;
    bool need_b = n.inputs[1]->requires_grad;
    auto& ga = n.inputs[0]->grad;
    auto& gb = n.inputs[1]->grad;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t i = r * C + c;
        std::size_t ib = b_index(mode, r, c, bc);
        if (need_a) ga[i] += g[i] * fa(av[i], bv[ib]);
        if (need_b) gb[ib] += g[i] * fb(av[i], bv[ib]);
      }
  };
}

}  // namespace

Tensor add(Tape* t, const Tensor& a, const Tensor& b) {
  Tensor out = binary("add", a, b, [](double x, double y) { return x + y; });
  return finish(t, "add", {a, b}, out,
                binary_backward(
                    "add", a, b, [](double, double) { return 1.0; },
                    [](double, double) { return 1.0; }));
}

Tensor sub(Tape* t, const Tensor& a, const Tensor& b) {
  Tensor out = binary("sub", a, b, [](double x, double y) { return x - y; });
  return finish(t, "sub", {a, b}, out,
                binary_backward(
                    "sub", a, b, [](double, double) { return 1.0; },
                    [](double, double) { return -1.0; }));
}

Tensor mul(Tape* t, const Tensor& a, const Tensor& b) {
  Tensor out = binary("mul", a, b, [](double x, double y) { return x * y; });
  return finish(t, "mul", {a, b}, out,
                binary_backward(
                    "mul", a, b, [](double, double y) { return y; },
                    [](double x, double) { return x; }));
}

Tensor div(Tape* t, const Tensor& a, const Tensor& b) {
  Tensor out = binary("div", a, b, [](double x, double y) { return x / y; });
  return finish(t, "div", {a, b}, out,
                binary_backward(
                    "div", a, b, [](double, double y) { return 1.0 / y; },
                    [](double x, double y) { return -x / (y * y); }));
}

namespace {

template <typename F, typename DF>
Tensor unary(Tape* t, const char* op, const Tensor& a, F f, DF df) {
  check_inputs(op, {a});
  Tensor out = make_out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = f(a.values()[i]);
  return finish(t, op, {a}, out, [df](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    const auto& x = n.inputs[0]->values;
    const auto& y = n.output->values;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

Tensor neg(Tape* t, const Tensor& a) {
  return unary(
      t, "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor abs(Tape* t, const Tensor& a) {
  return unary(
      t, "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(Tape* t, const Tensor& a) {
  return unary(
      t, "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(Tape* t, const Tensor& a) {
  return unary(
      t, "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(Tape* t, const Tensor& a) {
  Tensor out = unary(
      t, "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
  if (finite_checks && !out.all_finite()) throw Error("log: non-positive input");
  return out;
}

Tensor scale(Tape* t, const Tensor& a, double c) {
  return unary(
      t, "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor softmax_rows(Tape* t, const Tensor& a) {
  check_inputs("softmax_rows", {a});
  std::size_t R = a.rows(), C = a.cols();
  Tensor out = make_out(R, C);
  for (std::size_t r = 0; r < R; ++r) {
    double mx = a.at(r, 0);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a.at(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double e = std::exp(a.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (std::size_t c = 0; c < C; ++c) out.at(r, c) /= sum;
  }
  return finish(t, "softmax_rows", {a}, out, [R, C](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    const auto& y = n.output->values;
    for (std::size_t r = 0; r < R; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += g[r * C + c] * y[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        ga[r * C + c] += y[r * C + c] * (g[r * C + c] - dot);
    }
  });
}

Tensor layer_norm(Tape* t, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_inputs("layer_norm", {x, gamma, beta});
  std::size_t R = x.rows(), C = x.cols();
  if (gamma.size() != C || beta.size() != C)
    throw Error("layer_norm: affine shapes " + shape_str(gamma.shape()) + "/" +
                shape_str(beta.shape()) + " do not match feature width " + std::to_string(C));
  Tensor out = make_out(R, C);
  // cache per-row inverse std and normalized values for the backward pass
  auto inv_std = std::make_shared<std::vector<double>>(R);
  auto xhat = std::make_shared<std::vector<double>>(R * C);
  for (std::size_t r = 0; r < R; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += x.at(r, c);
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double d = x.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < C; ++c) {
      double xh = (x.at(r, c) - mean) * is;
      (*xhat)[r * C + c] = xh;
      out.at(r, c) = gamma.values()[c] * xh + beta.values()[c];
    }
  }
  return finish(t, "layer_norm", {x, gamma, beta}, out, [R, C, inv_std, xhat](Tape::Node& n) {
    const auto& g = n.output->grad;
    const auto& gam = n.inputs[1]->values;
    for (std::size_t r = 0; r < R; ++r) {
      double m_gg = 0.0, m_ggx = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        double gg = g[r * C + c] * gam[c];
        m_gg += gg;
        m_ggx += gg * (*xhat)[r * C + c];
      }
      m_gg /= static_cast<double>(C);
      m_ggx /= static_cast<double>(C);
      if (n.inputs[0]->requires_grad) {
        auto& gx = n.inputs[0]->grad;
        for (std::size_t c = 0; c < C; ++c) {
          double gg = g[r * C + c] * gam[c];
          gx[r * C + c] += (*inv_std)[r] * (gg - m_gg - (*xhat)[r * C + c] * m_ggx);
        }
      }
      if (n.inputs[1]->requires_grad) {
        auto& ggam = n.inputs[1]->grad;
        for (std::size_t c = 0; c < C; ++c) ggam[c] += g[r * C + c] * (*xhat)[r * C + c];
      }
      if (n.inputs[2]->requires_grad) {
        auto& gbet = n.inputs[2]->grad;
        for (std::size_t c = 0; c < C; ++c) gbet[c] += g[r * C + c];
      }
    }
  });
}

Tensor concat_rows(Tape* t, const Tensor& a, const Tensor& b) {
  check_inputs("concat_rows", {a, b});
  if (a.cols() != b.cols())
    throw Error("concat_rows: incompatible shapes " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
  std::size_t Ra = a.rows(), Rb = b.rows(), C = a.cols();
  Tensor out = make_out(Ra + Rb, C);
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + Ra * C);
  return finish(t, "concat_rows", {a, b}, out, [Ra, Rb, C](Tape::Node& n) {
    const auto& g = n.output->grad;
    if (n.inputs[0]->requires_grad) {
      auto& ga = n.inputs[0]->grad;
      for (std::size_t i = 0; i < Ra * C; ++i) ga[i] += g[i];
    }
    if (n.inputs[1]->requires_grad) {
      auto& gb = n.inputs[1]->grad;
      for (std::size_t i = 0; i < Rb * C; ++i) gb[i] += g[Ra * C + i];
    }
  });
}

Tensor concat_cols(Tape* t, const Tensor& a, const Tensor& b) {
  check_inputs("concat_cols", {a, b});
  if (a.rows() != b.rows())
    throw Error("concat_cols: incompatible shapes " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
  std::size_t R = a.rows(), Ca = a.cols(), Cb = b.cols();
  Tensor out = make_out(R, Ca + Cb);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < Ca; ++c) out.at(r, c) = a.at(r, c);
    for (std::size_t c = 0; c < Cb; ++c) out.at(r, Ca + c) = b.at(r, c);
  }
  return finish(t, "concat_cols", {a, b}, out, [R, Ca, Cb](Tape::Node& n) {
    const auto& g = n.output->grad;
    std::size_t C = Ca + Cb;
    if (n.inputs[0]->requires_grad) {
      auto& ga = n.inputs[0]->grad;
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < Ca; ++c) ga[r * Ca + c] += g[r * C + c];
    }
    if (n.inputs[1]->requires_grad) {
      auto& gb = n.inputs[1]->grad;
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < Cb; ++c) gb[r * Cb + c] += g[r * C + Ca + c];
    }
  });
}

Tensor slice_rows(Tape* t, const Tensor& a, std::size_t r0, std::size_t r1) {
  check_inputs("slice_rows", {a});
  if (r0 >= r1 || r1 > a.rows())
    throw Error("slice_rows: bounds [" + std::to_string(r0) + "," + std::to_string(r1) +
                ") on " + shape_str(a.shape()));
  std::size_t C = a.cols();
  Tensor out = make_out(r1 - r0, C);
  std::copy(a.values().begin() + r0 * C, a.values().begin() + r1 * C, out.values().begin());
  return finish(t, "slice_rows", {a}, out, [r0, r1, C](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    for (std::size_t i = 0; i < (r1 - r0) * C; ++i) ga[r0 * C + i] += g[i];
  });
}

Tensor slice_cols(Tape* t, const Tensor& a, std::size_t c0, std::size_t c1) {
  check_inputs("slice_cols", {a});
  if (c0 >= c1 || c1 > a.cols())
    throw Error("slice_cols: bounds [" + std::to_string(c0) + "," + std::to_string(c1) +
                ") on " + shape_str(a.shape()));
  std::size_t R = a.rows(), C = a.cols(), W = c1 - c0;
  Tensor out = make_out(R, W);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < W; ++c) out.at(r, c) = a.at(r, c0 + c);
  return finish(t, "slice_cols", {a}, out, [R, C, c0, W](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < W; ++c) ga[r * C + c0 + c] += g[r * W + c];
  });
}

Tensor sum_all(Tape* t, const Tensor& a) {
  check_inputs("sum_all", {a});
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s);
  return finish(t, "sum_all", {a}, out, [](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    double g = n.output->grad[0];
    for (auto& v : n.inputs[0]->grad) v += g;
  });
}

Tensor mean_all(Tape* t, const Tensor& a) {
  check_inputs("mean_all", {a});
  double s = 0.0;
  for (double v : a.values()) s += v;
  double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(s * inv);
  return finish(t, "mean_all", {a}, out, [inv](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    double g = n.output->grad[0] * inv;
    for (auto& v : n.inputs[0]->grad) v += g;
  });
}

Tensor sum_rows(Tape* t, const Tensor& a) {
  check_inputs("sum_rows", {a});
  std::size_t R = a.rows(), C = a.cols();
  Tensor out = make_out(R, 1);
  for (std::size_t r = 0; r < R; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += a.at(r, c);
    out.at(r, 0) = s;
  }
  return finish(t, "sum_rows", {a}, out, [R, C](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[r];
  });
}

Tensor sum_cols(Tape* t, const Tensor& a) {
  check_inputs("sum_cols", {a});
  std::size_t R = a.rows(), C = a.cols();
  Tensor out = make_out(1, C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out.at(0, c) += a.at(r, c);
  return finish(t, "sum_cols", {a}, out, [R, C](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    auto& ga = n.inputs[0]->grad;
    const auto& g = n.output->grad;
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[c];
  });
}

Tensor cross_entropy_logits(Tape* t, const Tensor& logits, std::size_t target) {
  check_inputs("cross_entropy_logits", {logits});
  if (logits.rows() != 1)
    throw Error("cross_entropy_logits: expected a single logit row, got " +
                shape_str(logits.shape()));
  std::size_t C = logits.cols();
  if (target >= C) throw Error("cross_entropy_logits: target out of range");
  double mx = logits.values()[0];
  for (double v : logits.values()) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits.values()) sum += std::exp(v - mx);
  double lse = mx + std::log(sum);
  Tensor out = Tensor::scalar(lse - logits.values()[target]);
  return finish(t, "cross_entropy_logits", {logits}, out, [C, target, mx, sum](Tape::Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    double g = n.output->grad[0];
    auto& gl = n.inputs[0]->grad;
    const auto& l = n.inputs[0]->values;
    for (std::size_t c = 0; c < C; ++c) {
      double p = std::exp(l[c] - mx) / sum;
      gl[c] += g * (p - (c == target ? 1.0 : 0.0));
    }
  });
}

Tensor mse(Tape* t, const Tensor& a, const Tensor& b) {
  Tensor d = sub(t, a, b);
  return mean_all(t, mul(t, d, d));
}

Tensor noisy_softmax(Tape* t, const Tensor& logits, const Tensor& noise, double temperature) {
  if (temperature <= 0.0) throw Error("noisy_softmax: temperature must be positive");
  return softmax_rows(t, scale(t, add(t, logits, noise), 1.0 / temperature));
}

const std::vector<OpKind>& all_op_kinds() {
  static const std::vector<OpKind> kinds = {
      OpKind::MatMul,     OpKind::Transpose, OpKind::Add,        OpKind::Sub,
      OpKind::Mul,        OpKind::Div,       OpKind::Neg,        OpKind::Abs,
      OpKind::Relu,       OpKind::Exp,       OpKind::Log,        OpKind::Scale,
      OpKind::SoftmaxRows, OpKind::LayerNorm, OpKind::ConcatRows, OpKind::ConcatCols,
      OpKind::SliceRows,  OpKind::SliceCols, OpKind::SumAll,     OpKind::MeanAll,
      OpKind::SumRows,    OpKind::SumCols,   OpKind::CrossEntropyLogits,
  };
  return kinds;
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Neg: return "neg";
    case OpKind::Abs: return "abs";
    case OpKind::Relu: return "relu";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Scale: return "scale";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::SliceRows: return "slice_rows";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::SumAll: return "sum_all";
    case OpKind::MeanAll: return "mean_all";
    case OpKind::SumRows: return "sum_rows";
    case OpKind::SumCols: return "sum_cols";
    case OpKind::CrossEntropyLogits: return "cross_entropy_logits";
  }
  return "?";
}

Tensor forward(Tape* t, OpKind kind, const std::vector<Tensor>& in, const OpAttrs& attrs) {
  auto need = [&](std::size_t n) {
    if (in.size() != n)
      throw Error(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs");
  };
  switch (kind) {
    case OpKind::MatMul: need(2); return matmul(t, in[0], in[1]);
    case OpKind::Transpose: need(1); return transpose(t, in[0]);
    case OpKind::Add: need(2); return add(t, in[0], in[1]);
    case OpKind::Sub: need(2); return sub(t, in[0], in[1]);
    case OpKind::Mul: need(2); return mul(t, in[0], in[1]);
    case OpKind::Div: need(2); return div(t, in[0], in[1]);
    case OpKind::Neg: need(1); return neg(t, in[0]);
    case OpKind::Abs: need(1); return abs(t, in[0]);
    case OpKind::Relu: need(1); return relu(t, in[0]);
    case OpKind::Exp: need(1); return exp(t, in[0]);
    case OpKind::Log: need(1); return log(t, in[0]);
    case OpKind::Scale: need(1); return scale(t, in[0], attrs.scale);
    case OpKind::SoftmaxRows: need(1); return softmax_rows(t, in[0]);
    case OpKind::LayerNorm: need(3); return layer_norm(t, in[0], in[1], in[2], attrs.eps);
    case OpKind::ConcatRows: need(2); return concat_rows(t, in[0], in[1]);
    case OpKind::ConcatCols: need(2); return concat_cols(t, in[0], in[1]);
    case OpKind::SliceRows: need(1); return slice_rows(t, in[0], attrs.i0, attrs.i1);
    case OpKind::SliceCols: need(1); return slice_cols(t, in[0], attrs.i0, attrs.i1);
    case OpKind::SumAll: need(1); return sum_all(t, in[0]);
    case OpKind::MeanAll: need(1); return mean_all(t, in[0]);
    case OpKind::SumRows: need(1); return sum_rows(t, in[0]);
    case OpKind::SumCols: need(1); return sum_cols(t, in[0]);
    case OpKind::CrossEntropyLogits: need(1); return cross_entropy_logits(t, in[0], attrs.target);
  }
  throw Error("forward: unknown op kind");
}

}  // namespace dslab::ops

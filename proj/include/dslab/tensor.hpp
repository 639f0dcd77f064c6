#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dslab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward touches it
  bool requires_grad = false;
  int node = -1;  // index into the recording tape, -1 for leaves
};

// Shared handle to a dense row-major double tensor. Networks only ever need
// rank <= 2; scalars are shape {1,1}.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return from_values(std::move(shape), {});
  }

  static Tensor from_values(Shape shape, std::vector<double> values) {
    auto d = std::make_shared<TensorData>();
    std::size_t n = shape_numel(shape);
    if (values.empty()) values.assign(n, 0.0);
    if (values.size() != n)
      throw Error("Tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    d->shape = std::move(shape);
    d->values = std::move(values);
    return Tensor(std::move(d));
  }

  static Tensor scalar(double v) { return from_values({1, 1}, {v}); }
  static Tensor row(std::vector<double> v) {
    std::size_t n = v.size();
    return from_values({1, n}, std::move(v));
  }
  static Tensor col(std::vector<double> v) {
    std::size_t n = v.size();
    return from_values({n, 1}, std::move(v));
  }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::size_t size() const { return d_->values.size(); }
  bool is_scalar() const { return size() == 1; }

  // rank-2 view; rank-1 tensors read as a single row
  std::size_t rows() const {
    return d_->shape.size() >= 2 ? d_->shape[0] : 1;
  }
  std::size_t cols() const {
    return d_->shape.size() >= 2 ? d_->shape[1] : (d_->shape.empty() ? 1 : d_->shape[0]);
  }

  double at(std::size_t r, std::size_t c) const { return d_->values[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return d_->values[r * cols() + c]; }
  double item() const {
    if (!is_scalar()) throw Error("Tensor::item on non-scalar " + shape_str(shape()));
    return d_->values[0];
  }

  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }
  std::vector<double>& grad() { return d_->grad; }
  const std::vector<double>& grad() const { return d_->grad; }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool rg) {
    d_->requires_grad = rg;
    return *this;
  }

  void ensure_grad() {
    if (d_->grad.size() != d_->values.size()) d_->grad.assign(d_->values.size(), 0.0);
  }
  void zero_grad() {
    if (!d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
  }

  bool all_finite() const {
    for (double v : d_->values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::shared_ptr<TensorData> data() const { return d_; }

  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}

 private:
  std::shared_ptr<TensorData> d_;
};

}  // namespace dslab

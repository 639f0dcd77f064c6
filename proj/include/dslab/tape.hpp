#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dslab/tensor.hpp"

namespace dslab {

// Define-by-run recording of forward operations. A tape is rebuilt for every
// forward pass and owns nothing but references; it is single-writer (see the
// concurrency notes in the README). backward() may be invoked repeatedly and
// always recomputes gradients from scratch, so two passes over the same
// recording agree bit for bit.
class Tape {
 public:
  struct Node {
    std::vector<std::shared_ptr<TensorData>> inputs;
    std::shared_ptr<TensorData> output;
    std::function<void(Node&)> backward;
    const char* op;
  };

  bool recording = true;

  void record(const char* op, std::vector<std::shared_ptr<TensorData>> inputs,
              std::shared_ptr<TensorData> output, std::function<void(Node&)> backward) {
    Node n;
    n.inputs = std::move(inputs);
    n.output = std::move(output);
    n.backward = std::move(backward);
    n.op = op;
    n.output->node = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(n));
  }

  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss recorded on this tape. Tensors that do
  // not reach the loss keep a zero gradient.
  void backward(const Tensor& loss) {
    if (!loss.defined() || !loss.is_scalar())
      throw Error("Tape::backward: loss must be a scalar tensor");
    int ln = loss.data()->node;
    if (ln < 0 || ln >= static_cast<int>(nodes_.size()) || nodes_[ln].output != loss.data())
      throw Error("Tape::backward: loss was not recorded on this tape");
    for (auto& n : nodes_) {
      n.output->grad.assign(n.output->values.size(), 0.0);
      for (auto& in : n.inputs) in->grad.assign(in->values.size(), 0.0);
    }
    nodes_[ln].output->grad[0] = 1.0;
    for (int i = ln; i >= 0; --i) {
      if (nodes_[i].backward) nodes_[i].backward(nodes_[i]);
    }
  }

 private:
  std::vector<Node> nodes_;
};

}  // namespace dslab

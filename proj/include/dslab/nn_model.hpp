#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dslab/adam.hpp"
#include "dslab/diffsort.hpp"
#include "dslab/lookup.hpp"

namespace dslab {

enum class Ablation { None, Frozen, NoPermute, NonAdaptive, SharedLoop };

Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);

// Architecture of the data-processing set encoder and the M query MLPs.
struct ModelConfig {
  std::size_t n = 16;            // dataset size N
  std::size_t dim = 1;           // point dimension d
  std::size_t m_lookups = 4;     // lookup budget M
  std::size_t extra_tokens = 0;  // extra-space tokens T
  std::size_t enc_blocks = 2;    // attention blocks S
  std::size_t enc_heads = 4;     // heads H
  std::size_t enc_width = 32;    // embedding width E
  std::size_t query_width = 128; // query MLP hidden width W
  double tau = 1.0;              // sort relaxation temperature
  double gumbel_temperature = 2.0;
  Ablation ablation = Ablation::None;

  bool adaptive() const { return ablation != Ablation::NonAdaptive; }
  bool shared_weights() const { return ablation == Ablation::SharedLoop; }
  bool no_permute() const { return ablation == Ablation::NoPermute; }

  std::size_t structure_rows() const { return n + extra_tokens; }
  std::size_t history_slots() const { return m_lookups - 1; }
  std::size_t query_input_dim() const { return dim + history_slots() * (1 + dim); }

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct NNModel {
  ModelConfig cfg;
  ParamStore params;
};

// fresh parameters for both networks (encoder, rank/token heads, query MLPs)
NNModel init_nn_model(const ModelConfig& cfg, std::uint64_t seed);

// deep copy of parameter values (tensors are freshly allocated)
ParamStore clone_params(const ParamStore& params);

enum class RunMode { Train, Eval };

// encoder outputs before structure assembly
struct EncoderOut {
  Tensor features;  // N x E, permutation-equivariant
  Tensor ranks;     // N x 1
  Tensor tokens;    // T x d (undefined when T = 0)
};

EncoderOut encoder_forward(Tape* tape, const ParamStore& params, const ModelConfig& cfg,
                           const Tensor& dataset);

struct BuildResult {
  Tensor structure;      // (N + T) x d
  SoftPermutation perm;  // soft in train mode, hard in eval mode
  Tensor ranks;
};

// D-hat = [P * D ; b_1..b_T] (train: soft P; eval: exact reorder). The
// no-permute ablation instead projects encoder features straight to rows.
BuildResult build_structure(Tape* tape, const ParamStore& params, const ModelConfig& cfg,
                            const Tensor& dataset, RunMode mode);

// v = m^T D-hat with the soft-lookup contract checked (nonnegative, sums to 1)
Tensor lookup(Tape* tape, const Tensor& m, const Tensor& structure);

// logits of query model `step` on (q, history); history must hold exactly
// `step` previous entries
struct HistoryEntry {
  std::size_t position = 0;       // eval mode: argmax index
  Tensor soft_position;           // train mode: soft m (1 x (N+T))
  Tensor value;                   // 1 x d
};

Tensor query_logits(Tape* tape, const ParamStore& params, const ModelConfig& cfg,
                    std::size_t step, const Tensor& query,
                    const std::vector<HistoryEntry>& history);

// full training-mode query execution (soft lookups, Gumbel noise)
struct TrainTrace {
  std::vector<Tensor> m;       // soft lookup vectors
  std::vector<Tensor> values;  // retrieved rows
  std::vector<Tensor> logits;  // pre-noise logits per step
  std::vector<Tensor> noise;   // the Gumbel draws applied to each step
  Tensor prediction;           // 1 x d
  std::size_t chosen_step = 0; // non-adaptive: closest-candidate index
};

TrainTrace run_query_execution_train(Tape* tape, const ParamStore& params,
                                     const ModelConfig& cfg, const Tensor& query,
                                     const Tensor& structure, Rng& noise_rng);

// Eval-mode structure with lookup accounting. Rows hold exact dataset rows
// (first N, permuted) followed by the token rows.
struct HardStructure {
  std::vector<std::vector<double>> rows;
  SoftPermutation perm;
  mutable std::size_t accesses = 0;

  const std::vector<double>& row(std::size_t i) const {
    ++accesses;
    return rows.at(i);
  }
};

HardStructure build_hard_structure(const ParamStore& params, const ModelConfig& cfg,
                                   const std::vector<std::vector<double>>& dataset);

// hard-mode execution: one-hot argmax lookups (ties to the smallest index)
LookupTrace run_query_execution_eval(const ParamStore& params, const ModelConfig& cfg,
                                     const std::vector<double>& query,
                                     const HardStructure& structure);

}  // namespace dslab

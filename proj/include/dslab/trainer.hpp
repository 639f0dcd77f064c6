#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dslab/checkpoint.hpp"
#include "dslab/datagen.hpp"
#include "dslab/nn_model.hpp"

namespace dslab {

enum class LossKind { Mse, CrossEntropy };
LossKind loss_from_string(const std::string& s);
std::string to_string(LossKind k);

struct TrainConfig {
  DistributionSpec dist;
  ModelConfig model;
  LossKind loss = LossKind::Mse;
  std::size_t batch = 256;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::size_t max_steps = 200000;
  std::size_t eval_every = 2000;
  std::size_t patience = 10;         // evaluations without improvement
  std::size_t eval_instances = 512;  // fixed held-out block
  std::size_t log_every = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  // strict: unknown keys are errors
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EvalReport {
  std::string label;
  std::vector<double> accuracy;  // per lookup; empty for the no-permute ablation
  std::vector<double> mse;       // per lookup
  double sortedness = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  std::size_t instances = 0;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static EvalReport load(const std::string& path);
};

struct LogRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::vector<double> eval_accuracy;  // empty when this row logged no evaluation
  double eval_mse_final = std::numeric_limits<double>::quiet_NaN();
  double sortedness = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  NNModel model;          // best parameters seen under early stopping
  AdamState adam;
  std::vector<LogRow> log;
  EvalReport step0_eval;
  EvalReport best_eval;
  std::size_t steps_run = 0;
  bool diverged = false;
  std::int64_t skipped_nonfinite = 0;
};

// training loss for one instance; exposed for tests
Tensor nn_instance_loss(Tape& tape, const ParamStore& params, const ModelConfig& cfg,
                        const NNInstance& inst, LossKind loss, Rng& noise_rng);

using ProgressFn = std::function<void(const LogRow&)>;

// Fresh instances every batch (infinite-data regime), gradient mean over the
// batch, Adam with decoupled weight decay, early stopping on the held-out
// block's final-lookup metric. Bit-reproducible for a fixed seed and thread
// count. Divergence (non-finite batch loss) halts with the last good
// parameters and sets `diverged`.
TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = nullptr);

// resumable variant: continues from an existing model/optimizer state at
// `start_step` with the early-stopping bookkeeping provided
struct TrainState {
  std::size_t start_step = 0;
  double best_metric = -1e300;
  std::size_t evals_since_best = 0;
  ParamStore best_params;  // empty until the first evaluation
};
TrainResult train_from(const TrainConfig& cfg, NNModel model, AdamState adam, TrainState state,
                       const ProgressFn& progress = nullptr);

// hard-mode evaluation of a learned model
EvalReport evaluate_model(const NNModel& model, const DistributionSpec& spec,
                          std::size_t n_instances, std::uint64_t seed_base,
                          std::size_t threads = 1, const std::string& label = "e2e");

// generic evaluation over any trace producer (baselines, oracles, ...)
using TraceFn = std::function<LookupTrace(const NNInstance&, std::uint64_t seed)>;
EvalReport evaluate_traces(const TraceFn& fn, const DistributionSpec& spec,
                           std::size_t n_instances, std::size_t m_lookups,
                           std::uint64_t seed_base, std::size_t threads = 1,
                           const std::string& label = "baseline");

// baseline adapters sharing the learned model's trace/report shapes
TraceFn binary_search_fn(std::size_t budget);
TraceFn interpolation_search_fn(std::size_t budget);
TraceFn kdtree_fn(std::size_t budget);
TraceFn lsh_fn(std::size_t k, std::size_t budget);
TraceFn bucket1d_fn(std::size_t t_buckets);
TraceFn random_lookup_fn(std::size_t budget);  // M distinct uniform positions
TraceFn oracle_fn();                           // cheats: first lookup hits y

// named experiment presets; overrides are applied onto the preset's JSON
TrainConfig make_preset(const std::string& name);
std::vector<std::string> preset_names();

// metric-definition invariants (acceptance: nondecreasing accuracy,
// nonincreasing mse per lookup)
bool accuracy_nondecreasing(const EvalReport& r, double tol = 0.0);
bool mse_nonincreasing(const EvalReport& r, double tol = 1e-12);

}  // namespace dslab

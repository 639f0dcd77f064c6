#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dslab/adam.hpp"
#include "dslab/datagen.hpp"
#include "dslab/nn_model.hpp"

namespace dslab {

// the streaming structure: a k-vector plus the stream position
struct SketchState {
  std::vector<double> values;
  std::size_t t = 0;

  explicit SketchState(std::size_t k = 0) : values(k, 0.0) {}
};

struct FreqConfig {
  std::size_t k = 32;            // sketch length
  std::size_t m_lookups = 1;     // M update positions and M query lookups
  std::size_t universe = 1000;   // element universe K
  double alpha = 1.2;
  std::size_t stream_len = 100;  // T
  bool permute_ranks = true;
  std::size_t enc_bits = 16;     // binary element encoding width
  std::size_t update_width = 64;
  std::size_t query_width = 64;
  std::size_t psi_width = 128;
  double gumbel_temperature = 2.0;

  void validate() const;
  nlohmann::json to_json() const;
  static FreqConfig from_json(const nlohmann::json& j);

  StreamSpec stream_spec() const {
    return StreamSpec{universe, alpha, stream_len, permute_ranks};
  }
};

// 16-bit binary expansion scaled to {-1, +1}; injective over the universe
Tensor encode_element(std::int64_t e, std::size_t bits);

struct FreqModel {
  FreqConfig cfg;
  ParamStore params;
};

FreqModel init_freq_model(const FreqConfig& cfg, std::uint64_t seed);

// Eval-mode behavior of any frequency structure: hard update positions and
// values per element, hard query positions, and the scalar predictor. The
// learned model and the CMS emulation both reduce to this shape.
struct FreqRules {
  std::size_t k = 0;
  std::size_t m = 0;
  std::function<void(std::int64_t, std::vector<std::size_t>&, std::vector<double>&)> update;
  std::function<std::vector<std::size_t>(std::int64_t)> query;
  std::function<double(const std::vector<double>&)> predict;
};

FreqRules rules_of(const FreqModel& model);
// exact CountMinSketch as a FreqRules configuration: u_i one-hot at row i's
// hashed bucket, v_i = delta, psi = min of the retrieved counters
FreqRules cms_emulation_rules(std::size_t width, std::size_t depth, double delta,
                              std::uint64_t seed);

// D_{t+1} = D_t + sum_i u_i * v_i; exactly M coordinates (with multiplicity)
// change per element in eval mode
void stream_update(SketchState& state, std::int64_t element, const FreqRules& rules);
double estimate_frequency(std::int64_t element, const SketchState& state, const FreqRules& rules);

struct MaeReport {
  std::vector<double> per_timestep;  // MAE at each queried timestep
  double overall = 0.0;
  std::size_t streams = 0;
  std::size_t queries = 0;
  std::string label;

  nlohmann::json to_json() const;
};

// Fixed-seed stream suite; the identical query schedule is applied to every
// compared method (seed_base drives both elements and queries).
MaeReport eval_mae(const FreqRules& rules, const StreamSpec& spec, std::size_t n_streams,
                   std::uint64_t seed_base, std::size_t threads = 1,
                   const std::string& label = "model");

struct FreqTrainConfig {
  FreqConfig model;
  std::size_t batch = 64;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::size_t max_steps = 4000;
  std::size_t eval_every = 250;
  std::size_t patience = 10;
  std::size_t eval_streams = 64;
  std::size_t queries_per_stream = 8;  // supervision timesteps per training stream
  std::size_t log_every = 50;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static FreqTrainConfig from_json(const nlohmann::json& j);
};

struct FreqTrainResult {
  FreqModel model;
  AdamState adam;
  std::vector<std::pair<std::size_t, double>> loss_log;  // (step, batch MAE loss)
  double step0_mae = 0.0;
  double best_mae = 0.0;
  std::size_t steps_run = 0;
  bool diverged = false;
};

// training loss for one stream instance; exposed for tests
Tensor freq_instance_loss(Tape& tape, const ParamStore& params, const FreqConfig& cfg,
                          const StreamInstance& stream, std::size_t queries_per_stream,
                          Rng& noise_rng);

FreqTrainResult train_freq(const FreqTrainConfig& cfg,
                           const std::function<void(std::size_t, double, double)>& progress = nullptr);

}  // namespace dslab

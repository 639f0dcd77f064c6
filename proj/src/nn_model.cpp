#include "dslab/nn_model.hpp"

#include <algorithm>
#include <cmath>

#include "dslab/ops.hpp"

namespace dslab {

namespace op = ops;

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::None;
  if (s == "frozen") return Ablation::Frozen;
  if (s == "no_permute") return Ablation::NoPermute;
  if (s == "non_adaptive") return Ablation::NonAdaptive;
  if (s == "shared_loop") return Ablation::SharedLoop;
  throw Error("unknown ablation: " + s);
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::Frozen: return "frozen";
    case Ablation::NoPermute: return "no_permute";
    case Ablation::NonAdaptive: return "non_adaptive";
    case Ablation::SharedLoop: return "shared_loop";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (n == 0) throw Error("ModelConfig: N must be positive");
  if (dim == 0) throw Error("ModelConfig: dim must be positive");
  if (m_lookups == 0) throw Error("ModelConfig: M must be positive");
  if (enc_width == 0 || enc_heads == 0 || enc_blocks == 0)
    throw Error("ModelConfig: encoder dimensions must be positive");
  if (enc_width % enc_heads != 0) throw Error("ModelConfig: heads must divide encoder width");
  if (query_width == 0) throw Error("ModelConfig: query width must be positive");
  if (tau <= 0.0) throw Error("ModelConfig: tau must be positive");
  if (gumbel_temperature <= 0.0) throw Error("ModelConfig: gumbel temperature must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"n", n},
          {"dim", dim},
          {"m_lookups", m_lookups},
          {"extra_tokens", extra_tokens},
          {"enc_blocks", enc_blocks},
          {"enc_heads", enc_heads},
          {"enc_width", enc_width},
          {"query_width", query_width},
          {"tau", tau},
          {"gumbel_temperature", gumbel_temperature},
          {"ablation", to_string(ablation)}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n = j.value("n", c.n);
  c.dim = j.value("dim", c.dim);
  c.m_lookups = j.value("m_lookups", c.m_lookups);
  c.extra_tokens = j.value("extra_tokens", c.extra_tokens);
  c.enc_blocks = j.value("enc_blocks", c.enc_blocks);
  c.enc_heads = j.value("enc_heads", c.enc_heads);
  c.enc_width = j.value("enc_width", c.enc_width);
  c.query_width = j.value("query_width", c.query_width);
  c.tau = j.value("tau", c.tau);
  c.gumbel_temperature = j.value("gumbel_temperature", c.gumbel_temperature);
  if (j.contains("ablation")) c.ablation = ablation_from_string(j["ablation"]);
  c.validate();
  return c;
}

namespace {

Tensor rand_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Tensor t = Tensor::zeros({rows, cols});
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

void add_linear(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  ps.add(prefix + ".w", rand_matrix(in, out, std::sqrt(2.0 / static_cast<double>(in)), rng));
  ps.add(prefix + ".b", Tensor::zeros({1, out}));
}

void add_layernorm(ParamStore& ps, const std::string& prefix, std::size_t width) {
  Tensor gamma = Tensor::zeros({1, width});
  for (auto& v : gamma.values()) v = 1.0;
  ps.add(prefix + ".gamma", gamma);
  ps.add(prefix + ".beta", Tensor::zeros({1, width}));
}

Tensor linear(Tape* t, const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  return op::add(t, op::matmul(t, x, ps.at(prefix + ".w")), ps.at(prefix + ".b"));
}

Tensor layernorm(Tape* t, const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  return op::layer_norm(t, x, ps.at(prefix + ".gamma"), ps.at(prefix + ".beta"));
}

std::string qprefix(const ModelConfig& cfg, std::size_t step) {
  return cfg.shared_weights() ? std::string("q.shared") : "q" + std::to_string(step);
}

}  // namespace

NNModel init_nn_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0xA11CE));
  NNModel model;
  model.cfg = cfg;
  ParamStore& ps = model.params;
  std::size_t e = cfg.enc_width;

  add_linear(ps, "dp.embed", cfg.dim, e, rng);
  for (std::size_t b = 0; b < cfg.enc_blocks; ++b) {
    std::string pb = "dp.b" + std::to_string(b);
    add_layernorm(ps, pb + ".ln1", e);
    ps.add(pb + ".attn.wq", rand_matrix(e, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    ps.add(pb + ".attn.wk", rand_matrix(e, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    ps.add(pb + ".attn.wv", rand_matrix(e, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    ps.add(pb + ".attn.wo", rand_matrix(e, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    add_layernorm(ps, pb + ".ln2", e);
    add_linear(ps, pb + ".mlp.l1", e, 4 * e, rng);
    add_linear(ps, pb + ".mlp.l2", 4 * e, e, rng);
  }
  add_layernorm(ps, "dp.lnf", e);
  add_linear(ps, "dp.rank", e, 1, rng);
  if (cfg.extra_tokens > 0) {
    ps.add("dp.tok.read",
           rand_matrix(cfg.extra_tokens, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    ps.add("dp.tok.wk", rand_matrix(e, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    ps.add("dp.tok.wv", rand_matrix(e, e, std::sqrt(1.0 / static_cast<double>(e)), rng));
    add_linear(ps, "dp.tok.out", e, cfg.dim, rng);
  }
  if (cfg.no_permute()) add_linear(ps, "dp.direct", e, cfg.dim, rng);

  std::size_t n_query_models = cfg.shared_weights() ? 1 : cfg.m_lookups;
  for (std::size_t i = 0; i < n_query_models; ++i) {
    std::string pq = cfg.shared_weights() ? std::string("q.shared") : "q" + std::to_string(i);
    std::size_t in = cfg.query_input_dim();
    std::size_t w = cfg.query_width;
    add_linear(ps, pq + ".l1", in, w, rng);
    add_layernorm(ps, pq + ".ln1", w);
    add_linear(ps, pq + ".l2", w, w, rng);
    add_layernorm(ps, pq + ".ln2", w);
    add_linear(ps, pq + ".l3", w, w, rng);
    add_layernorm(ps, pq + ".ln3", w);
    add_linear(ps, pq + ".out", w, cfg.structure_rows(), rng);
  }
  return model;
}

ParamStore clone_params(const ParamStore& params) {
  ParamStore out;
  for (const auto& name : params.names()) {
    const Tensor& src = params.at(name);
    out.add(name, Tensor::from_values(src.shape(), src.values()));
  }
  return out;
}

EncoderOut encoder_forward(Tape* tape, const ParamStore& ps, const ModelConfig& cfg,
                           const Tensor& dataset) {
  if (dataset.rows() != cfg.n || dataset.cols() != cfg.dim)
    throw Error("encoder_forward: dataset " + shape_str(dataset.shape()) + " does not match N=" +
                std::to_string(cfg.n) + ", d=" + std::to_string(cfg.dim));
  std::size_t e = cfg.enc_width;
  std::size_t heads = cfg.enc_heads;
  std::size_t dk = e / heads;
  double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor x = linear(tape, ps, "dp.embed", dataset);
  for (std::size_t b = 0; b < cfg.enc_blocks; ++b) {
    std::string pb = "dp.b" + std::to_string(b);
    Tensor a = layernorm(tape, ps, pb + ".ln1", x);
    Tensor qm = op::matmul(tape, a, ps.at(pb + ".attn.wq"));
    Tensor km = op::matmul(tape, a, ps.at(pb + ".attn.wk"));
    Tensor vm = op::matmul(tape, a, ps.at(pb + ".attn.wv"));
    Tensor heads_out;
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor qh = op::slice_cols(tape, qm, h * dk, (h + 1) * dk);
      Tensor kh = op::slice_cols(tape, km, h * dk, (h + 1) * dk);
      Tensor vh = op::slice_cols(tape, vm, h * dk, (h + 1) * dk);
      Tensor scores =
          op::scale(tape, op::matmul(tape, qh, op::transpose(tape, kh)), att_scale);
      Tensor oh = op::matmul(tape, op::softmax_rows(tape, scores), vh);
      heads_out = h == 0 ? oh : op::concat_cols(tape, heads_out, oh);
    }
    Tensor attn = op::matmul(tape, heads_out, ps.at(pb + ".attn.wo"));
    x = op::add(tape, x, attn);
    Tensor m = layernorm(tape, ps, pb + ".ln2", x);
    Tensor hidden = op::relu(tape, linear(tape, ps, pb + ".mlp.l1", m));
    x = op::add(tape, x, linear(tape, ps, pb + ".mlp.l2", hidden));
  }
  EncoderOut out;
  out.features = layernorm(tape, ps, "dp.lnf", x);
  out.ranks = linear(tape, ps, "dp.rank", out.features);
  if (cfg.extra_tokens > 0) {
    Tensor k2 = op::matmul(tape, out.features, ps.at("dp.tok.wk"));
    Tensor v2 = op::matmul(tape, out.features, ps.at("dp.tok.wv"));
    Tensor scores = op::scale(tape, op::matmul(tape, ps.at("dp.tok.read"), op::transpose(tape, k2)),
                              1.0 / std::sqrt(static_cast<double>(e)));
    Tensor pooled = op::matmul(tape, op::softmax_rows(tape, scores), v2);
    out.tokens = linear(tape, ps, "dp.tok.out", pooled);
  }
  return out;
}

BuildResult build_structure(Tape* tape, const ParamStore& ps, const ModelConfig& cfg,
                            const Tensor& dataset, RunMode mode) {
  if (dataset.rows() == 0) throw Error("build_structure: empty dataset");
  EncoderOut enc = encoder_forward(tape, ps, cfg, dataset);
  BuildResult res;
  res.ranks = enc.ranks;
  Tensor rows;
  if (cfg.no_permute()) {
    rows = linear(tape, ps, "dp.direct", enc.features);
    res.perm = hard_sort(enc.ranks.values());  // kept for diagnostics only
  } else if (mode == RunMode::Train) {
    res.perm = soft_sort(tape, enc.ranks, cfg.tau);
    rows = apply_permutation(tape, res.perm, dataset);
  } else {
    res.perm = hard_sort(enc.ranks.values());
    rows = apply_permutation(nullptr, res.perm, dataset);
  }
  res.structure = cfg.extra_tokens > 0 ? op::concat_rows(tape, rows, enc.tokens) : rows;
  return res;
}

Tensor lookup(Tape* tape, const Tensor& m, const Tensor& structure) {
  if (m.rows() != 1 || m.cols() != structure.rows())
    throw Error("lookup: m " + shape_str(m.shape()) + " does not match structure " +
                shape_str(structure.shape()));
  double sum = 0.0;
  for (double v : m.values()) {
    if (v < 0.0) throw Error("lookup: negative lookup weight");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error("lookup: weights sum to " + std::to_string(sum));
  return op::matmul(tape, m, structure);
}

namespace {

// fixed-width query input: [q | slot_1 .. slot_{M-1}], slot = (pos, value),
// pos = (index+1)/(N+T) so that zero-padding is distinguishable from a
// lookup at position 0
Tensor assemble_query_input(Tape* tape, const ModelConfig& cfg, const Tensor& query,
                            const std::vector<HistoryEntry>& history) {
  std::size_t slots = cfg.history_slots();
  Tensor input = query;
  double denom = static_cast<double>(cfg.structure_rows());
  for (std::size_t s = 0; s < slots; ++s) {
    bool filled = cfg.adaptive() && s < history.size();
    Tensor pos, value;
    if (filled) {
      const HistoryEntry& h = history[s];
      if (h.soft_position.defined()) {
        // expected (index+1)/(N+T) under the soft lookup distribution
        Tensor idx = Tensor::zeros({static_cast<std::size_t>(cfg.structure_rows()), 1});
        for (std::size_t j = 0; j < cfg.structure_rows(); ++j)
          idx.values()[j] = static_cast<double>(j + 1) / denom;
        pos = op::matmul(tape, h.soft_position, idx);
      } else {
        pos = Tensor::scalar(static_cast<double>(h.position + 1) / denom);
      }
      value = h.value;
    } else {
      pos = Tensor::scalar(0.0);
      value = Tensor::zeros({1, cfg.dim});
    }
    input = op::concat_cols(tape, input, op::concat_cols(tape, pos, value));
  }
  return input;
}

}  // namespace

Tensor query_logits(Tape* tape, const ParamStore& ps, const ModelConfig& cfg, std::size_t step,
                    const Tensor& query, const std::vector<HistoryEntry>& history) {
  if (step >= cfg.m_lookups) throw Error("query_logits: step out of range");
  if (cfg.adaptive() && history.size() != step)
    throw Error("query_logits: history holds " + std::to_string(history.size()) +
                " entries, expected " + std::to_string(step));
  std::string pq = qprefix(cfg, step);
  Tensor h = assemble_query_input(tape, cfg, query, history);
  h = op::relu(tape, layernorm(tape, ps, pq + ".ln1", linear(tape, ps, pq + ".l1", h)));
  h = op::relu(tape, layernorm(tape, ps, pq + ".ln2", linear(tape, ps, pq + ".l2", h)));
  h = op::relu(tape, layernorm(tape, ps, pq + ".ln3", linear(tape, ps, pq + ".l3", h)));
  return linear(tape, ps, pq + ".out", h);
}

TrainTrace run_query_execution_train(Tape* tape, const ParamStore& ps, const ModelConfig& cfg,
                                     const Tensor& query, const Tensor& structure,
                                     Rng& noise_rng) {
  TrainTrace trace;
  std::vector<HistoryEntry> history;
  for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
    Tensor logits = query_logits(tape, ps, cfg, i, query, history);
    Tensor noise = sample_gumbel({1, cfg.structure_rows()}, noise_rng);
    Tensor m = op::noisy_softmax(tape, logits, noise, cfg.gumbel_temperature);
    Tensor v = lookup(tape, m, structure);
    trace.logits.push_back(logits);
    trace.noise.push_back(noise);
    trace.m.push_back(m);
    trace.values.push_back(v);
    if (cfg.adaptive()) history.push_back({0, m, v});
  }
  if (cfg.adaptive()) {
    trace.chosen_step = cfg.m_lookups - 1;
    trace.prediction = trace.values.back();
  } else {
    // closest candidate to the query wins; gradient flows through it alone
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
      double d = 0.0;
      for (std::size_t c = 0; c < cfg.dim; ++c) {
        double diff = trace.values[i].values()[c] - query.values()[c];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    trace.chosen_step = best;
    trace.prediction = trace.values[best];
  }
  return trace;
}

HardStructure build_hard_structure(const ParamStore& ps, const ModelConfig& cfg,
                                   const std::vector<std::vector<double>>& dataset) {
  Tensor d = Tensor::zeros({dataset.size(), cfg.dim});
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t c = 0; c < cfg.dim; ++c) d.at(i, c) = dataset[i][c];
  BuildResult built = build_structure(nullptr, ps, cfg, d, RunMode::Eval);
  HardStructure hs;
  hs.perm = built.perm;
  hs.rows.resize(built.structure.rows());
  for (std::size_t r = 0; r < built.structure.rows(); ++r) {
    hs.rows[r].resize(cfg.dim);
    for (std::size_t c = 0; c < cfg.dim; ++c) hs.rows[r][c] = built.structure.at(r, c);
  }
  // hard mode keeps dataset rows bit-exact through the permutation
  if (!cfg.no_permute()) {
    for (std::size_t r = 0; r < cfg.n; ++r) {
      if (hs.rows[r] != dataset[hs.perm.perm[r]])
        throw Error("build_hard_structure: permuted row is not a dataset row");
    }
  }
  return hs;
}

LookupTrace run_query_execution_eval(const ParamStore& ps, const ModelConfig& cfg,
                                     const std::vector<double>& query,
                                     const HardStructure& structure) {
  Tensor q = Tensor::zeros({1, cfg.dim});
  for (std::size_t c = 0; c < cfg.dim; ++c) q.at(0, c) = query[c];
  LookupTrace trace;
  std::vector<HistoryEntry> history;
  for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
    Tensor logits = query_logits(nullptr, ps, cfg, i, q, history);
    // hardmax, ties to the smallest index
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j)
      if (logits.values()[j] > logits.values()[best]) best = j;
    const std::vector<double>& row = structure.row(best);
    trace.positions.push_back(best);
    trace.values.push_back(row);
    if (cfg.adaptive()) {
      Tensor v = Tensor::zeros({1, cfg.dim});
      for (std::size_t c = 0; c < cfg.dim; ++c) v.at(0, c) = row[c];
      history.push_back({best, Tensor(), v});
    }
  }
  finalize_trace(trace, query);
  if (cfg.adaptive()) trace.prediction = trace.values.back();
  return trace;
}

}  // namespace dslab

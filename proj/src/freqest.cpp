#include "dslab/freqest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "dslab/baselines.hpp"
#include "dslab/ops.hpp"
#include "dslab/parallel.hpp"

namespace dslab {

namespace op = ops;

void FreqConfig::validate() const {
  if (k == 0) throw Error("FreqConfig: k must be positive");
  if (m_lookups == 0) throw Error("FreqConfig: M must be positive");
  if (universe == 0) throw Error("FreqConfig: empty universe");
  if (stream_len == 0) throw Error("FreqConfig: zero-length streams");
  if (enc_bits == 0 || enc_bits > 63) throw Error("FreqConfig: bad encoding width");
  if ((std::uint64_t{1} << enc_bits) <= universe)
    throw Error("FreqConfig: encoding width cannot represent the universe");
  if (gumbel_temperature <= 0.0) throw Error("FreqConfig: gumbel temperature must be positive");
}

nlohmann::json FreqConfig::to_json() const {
  return {{"k", k},
          {"m_lookups", m_lookups},
          {"universe", universe},
          {"alpha", alpha},
          {"stream_len", stream_len},
          {"permute_ranks", permute_ranks},
          {"enc_bits", enc_bits},
          {"update_width", update_width},
          {"query_width", query_width},
          {"psi_width", psi_width},
          {"gumbel_temperature", gumbel_temperature}};
}

FreqConfig FreqConfig::from_json(const nlohmann::json& j) {
  FreqConfig c;
  c.k = j.value("k", c.k);
  c.m_lookups = j.value("m_lookups", c.m_lookups);
  c.universe = j.value("universe", c.universe);
  c.alpha = j.value("alpha", c.alpha);
  c.stream_len = j.value("stream_len", c.stream_len);
  c.permute_ranks = j.value("permute_ranks", c.permute_ranks);
  c.enc_bits = j.value("enc_bits", c.enc_bits);
  c.update_width = j.value("update_width", c.update_width);
  c.query_width = j.value("query_width", c.query_width);
  c.psi_width = j.value("psi_width", c.psi_width);
  c.gumbel_temperature = j.value("gumbel_temperature", c.gumbel_temperature);
  c.validate();
  return c;
}

Tensor encode_element(std::int64_t e, std::size_t bits) {
  Tensor t = Tensor::zeros({1, bits});
  for (std::size_t b = 0; b < bits; ++b)
    t.values()[b] = ((static_cast<std::uint64_t>(e) >> b) & 1u) ? 1.0 : -1.0;
  return t;
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

Tensor mlp3(Tape* t, const ParamStore& ps, const std::string& prefix, Tensor h) {
  h = op::relu(t, op::layer_norm(t, op::add(t, op::matmul(t, h, ps.at(prefix + ".l1.w")),
                                            ps.at(prefix + ".l1.b")),
                                 ps.at(prefix + ".ln1.gamma"), ps.at(prefix + ".ln1.beta")));
  h = op::relu(t, op::layer_norm(t, op::add(t, op::matmul(t, h, ps.at(prefix + ".l2.w")),
                                            ps.at(prefix + ".l2.b")),
                                 ps.at(prefix + ".ln2.gamma"), ps.at(prefix + ".ln2.beta")));
  h = op::relu(t, op::layer_norm(t, op::add(t, op::matmul(t, h, ps.at(prefix + ".l3.w")),
                                            ps.at(prefix + ".l3.b")),
                                 ps.at(prefix + ".ln3.gamma"), ps.at(prefix + ".ln3.beta")));
  return op::add(t, op::matmul(t, h, ps.at(prefix + ".out.w")), ps.at(prefix + ".out.b"));
}

void add_mlp3(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t width,
              std::size_t out, Rng& rng) {
  add_linear(ps, prefix + ".l1", in, width, rng);
  add_layernorm(ps, prefix + ".ln1", width);
  add_linear(ps, prefix + ".l2", width, width, rng);
  add_layernorm(ps, prefix + ".ln2", width);
  add_linear(ps, prefix + ".l3", width, width, rng);
  add_layernorm(ps, prefix + ".ln3", width);
  add_linear(ps, prefix + ".out", width, out, rng);
}

Tensor psi_forward(Tape* t, const ParamStore& ps, Tensor h) {
  h = op::relu(t, op::layer_norm(t, op::add(t, op::matmul(t, h, ps.at("psi.l1.w")),
                                            ps.at("psi.l1.b")),
                                 ps.at("psi.ln1.gamma"), ps.at("psi.ln1.beta")));
  h = op::relu(t, op::layer_norm(t, op::add(t, op::matmul(t, h, ps.at("psi.l2.w")),
                                            ps.at("psi.l2.b")),
                                 ps.at("psi.ln2.gamma"), ps.at("psi.ln2.beta")));
  return op::add(t, op::matmul(t, h, ps.at("psi.out.w")), ps.at("psi.out.b"));
}

}  // namespace

FreqModel init_freq_model(const FreqConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0xF4E9));
  FreqModel model;
  model.cfg = cfg;
  ParamStore& ps = model.params;
  // update network: M position logit blocks followed by M scalar values
  add_mlp3(ps, "upd", cfg.enc_bits, cfg.update_width, (cfg.k + 1) * cfg.m_lookups, rng);
  for (std::size_t i = 0; i < cfg.m_lookups; ++i)
    add_mlp3(ps, "q" + std::to_string(i), cfg.enc_bits, cfg.query_width, cfg.k, rng);
  add_linear(ps, "psi.l1", cfg.m_lookups, cfg.psi_width, rng);
  add_layernorm(ps, "psi.ln1", cfg.psi_width);
  add_linear(ps, "psi.l2", cfg.psi_width, cfg.psi_width, rng);
  add_layernorm(ps, "psi.ln2", cfg.psi_width);
  add_linear(ps, "psi.out", cfg.psi_width, 1, rng);
  return model;
}

namespace {

std::size_t argmax_row(const Tensor& t, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t j = lo + 1; j < hi; ++j)
    if (t.values()[j] > t.values()[best]) best = j;
  return best - lo;
}

}  // namespace

FreqRules rules_of(const FreqModel& model) {
  // shared_ptr so the rules survive the model handle going out of scope
  auto params = std::make_shared<ParamStore>(clone_params(model.params));
  FreqConfig cfg = model.cfg;
  FreqRules rules;
  rules.k = cfg.k;
  rules.m = cfg.m_lookups;
  rules.update = [params, cfg](std::int64_t e, std::vector<std::size_t>& pos,
                               std::vector<double>& val) {
    Tensor out = mlp3(nullptr, *params, "upd", encode_element(e, cfg.enc_bits));
    pos.resize(cfg.m_lookups);
    val.resize(cfg.m_lookups);
    for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
      pos[i] = argmax_row(out, i * cfg.k, (i + 1) * cfg.k);
      val[i] = out.values()[cfg.m_lookups * cfg.k + i];
    }
  };
  rules.query = [params, cfg](std::int64_t e) {
    std::vector<std::size_t> pos(cfg.m_lookups);
    for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
      Tensor logits =
          mlp3(nullptr, *params, "q" + std::to_string(i), encode_element(e, cfg.enc_bits));
      pos[i] = argmax_row(logits, 0, cfg.k);
    }
    return pos;
  };
  rules.predict = [params](const std::vector<double>& retrieved) {
    Tensor in = Tensor::row(retrieved);
    return psi_forward(nullptr, *params, in).item();
  };
  return rules;
}

FreqRules cms_emulation_rules(std::size_t width, std::size_t depth, double delta,
                              std::uint64_t seed) {
  auto hasher = std::make_shared<CountMinSketch>(width, depth, delta, seed);
  FreqRules rules;
  rules.k = width * depth;
  rules.m = depth;
  rules.update = [hasher, width, depth, delta](std::int64_t e, std::vector<std::size_t>& pos,
                                               std::vector<double>& val) {
    pos.resize(depth);
    val.assign(depth, delta);
    for (std::size_t r = 0; r < depth; ++r) pos[r] = r * width + hasher->bucket(r, e);
  };
  rules.query = [hasher, width, depth](std::int64_t e) {
    std::vector<std::size_t> pos(depth);
    for (std::size_t r = 0; r < depth; ++r) pos[r] = r * width + hasher->bucket(r, e);
    return pos;
  };
  rules.predict = [](const std::vector<double>& retrieved) {
    double m = retrieved[0];
    for (double v : retrieved) m = std::min(m, v);
    return m;
  };
  return rules;
}

void stream_update(SketchState& state, std::int64_t element, const FreqRules& rules) {
  if (state.values.size() != rules.k) throw Error("stream_update: state size mismatch");
  std::vector<std::size_t> pos;
  std::vector<double> val;
  rules.update(element, pos, val);
  if (pos.size() != rules.m || val.size() != rules.m)
    throw Error("stream_update: rule emitted wrong arity");
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (pos[i] >= state.values.size()) throw Error("stream_update: position out of range");
    state.values[pos[i]] += val[i];
  }
  state.t += 1;
}

double estimate_frequency(std::int64_t element, const SketchState& state,
                          const FreqRules& rules) {
  std::vector<std::size_t> pos = rules.query(element);
  std::vector<double> retrieved(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) retrieved[i] = state.values.at(pos[i]);
  return rules.predict(retrieved);
}

nlohmann::json MaeReport::to_json() const {
  return {{"label", label},
          {"per_timestep", per_timestep},
          {"overall", overall},
          {"streams", streams},
          {"queries", queries}};
}

MaeReport eval_mae(const FreqRules& rules, const StreamSpec& spec, std::size_t n_streams,
                   std::uint64_t seed_base, std::size_t threads, const std::string& label) {
  std::size_t t_len = spec.length;
  std::size_t nthreads = std::max<std::size_t>(1, threads);
  std::vector<std::vector<double>> err(nthreads, std::vector<double>(t_len, 0.0));
  std::vector<std::vector<std::size_t>> cnt(nthreads, std::vector<std::size_t>(t_len, 0));
  parallel_chunks(n_streams, nthreads, [&](std::size_t th, std::size_t lo, std::size_t hi) {
    // element behavior is a pure function of the element; memoize per worker
    std::unordered_map<std::int64_t, std::pair<std::vector<std::size_t>, std::vector<double>>>
        upd_memo;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> qry_memo;
    for (std::size_t s = lo; s < hi; ++s) {
      StreamInstance stream = gen_stream(spec, t_len, mix_seed(seed_base, s));
      SketchState state(rules.k);
      for (std::size_t t = 0; t < t_len; ++t) {
        std::int64_t e = stream.elements[t];
        auto it = upd_memo.find(e);
        if (it == upd_memo.end()) {
          std::pair<std::vector<std::size_t>, std::vector<double>> uv;
          rules.update(e, uv.first, uv.second);
          it = upd_memo.emplace(e, std::move(uv)).first;
        }
        for (std::size_t i = 0; i < it->second.first.size(); ++i)
          state.values[it->second.first[i]] += it->second.second[i];
        state.t += 1;
        const StreamQuery& q = stream.queries[t];
        auto qit = qry_memo.find(q.element);
        if (qit == qry_memo.end())
          qit = qry_memo.emplace(q.element, rules.query(q.element)).first;
        std::vector<double> retrieved(qit->second.size());
        for (std::size_t i = 0; i < qit->second.size(); ++i)
          retrieved[i] = state.values[qit->second[i]];
        double est = rules.predict(retrieved);
        err[th][t] += std::abs(est - static_cast<double>(q.true_count));
        cnt[th][t] += 1;
      }
    }
  });
  MaeReport rep;
  rep.label = label;
  rep.streams = n_streams;
  rep.per_timestep.assign(t_len, 0.0);
  double total = 0.0;
  std::size_t total_n = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    double e = 0.0;
    std::size_t n = 0;
    for (std::size_t th = 0; th < nthreads; ++th) {
      e += err[th][t];
      n += cnt[th][t];
    }
    rep.per_timestep[t] = n ? e / static_cast<double>(n) : 0.0;
    total += e;
    total_n += n;
  }
  rep.overall = total_n ? total / static_cast<double>(total_n) : 0.0;
  rep.queries = total_n;
  return rep;
}

Tensor freq_instance_loss(Tape& tape, const ParamStore& ps, const FreqConfig& cfg,
                          const StreamInstance& stream, std::size_t queries_per_stream,
                          Rng& noise_rng) {
  std::size_t t_len = stream.elements.size();
  // supervision timesteps: uniform draw without replacement, ordered
  std::size_t n_q = std::min(queries_per_stream, t_len);
  std::set<std::size_t> chosen;
  while (chosen.size() < n_q)
    chosen.insert(static_cast<std::size_t>(
        noise_rng.uniform_int(0, static_cast<std::int64_t>(t_len) - 1)));

  Tensor state = Tensor::zeros({1, cfg.k});
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor enc = encode_element(stream.elements[t], cfg.enc_bits);
    Tensor out = mlp3(&tape, ps, "upd", enc);
    for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
      Tensor logits = op::slice_cols(&tape, out, i * cfg.k, (i + 1) * cfg.k);
      Tensor value =
          op::slice_cols(&tape, out, cfg.m_lookups * cfg.k + i, cfg.m_lookups * cfg.k + i + 1);
      Tensor noise = sample_gumbel({1, cfg.k}, noise_rng);
      Tensor u = op::noisy_softmax(&tape, logits, noise, cfg.gumbel_temperature);
      state = op::add(&tape, state, op::mul(&tape, u, value));
    }
    if (chosen.count(t)) {
      const StreamQuery& q = stream.queries[t];
      Tensor qenc = encode_element(q.element, cfg.enc_bits);
      Tensor vals;
      for (std::size_t i = 0; i < cfg.m_lookups; ++i) {
        Tensor logits = mlp3(&tape, ps, "q" + std::to_string(i), qenc);
        Tensor noise = sample_gumbel({1, cfg.k}, noise_rng);
        Tensor m = op::noisy_softmax(&tape, logits, noise, cfg.gumbel_temperature);
        Tensor v = op::sum_all(&tape, op::mul(&tape, m, state));
        vals = i == 0 ? v : op::concat_cols(&tape, vals, v);
      }
      Tensor est = psi_forward(&tape, ps, vals);
      Tensor diff = op::abs(
          &tape, op::sub(&tape, est, Tensor::scalar(static_cast<double>(q.true_count))));
      total = op::add(&tape, total, diff);
    }
  }
  return op::scale(&tape, total, 1.0 / static_cast<double>(n_q));
}

void FreqTrainConfig::validate() const {
  model.validate();
  if (batch == 0) throw Error("FreqTrainConfig: batch must be positive");
  if (queries_per_stream == 0) throw Error("FreqTrainConfig: queries_per_stream must be positive");
  if (threads == 0) throw Error("FreqTrainConfig: threads must be positive");
}

nlohmann::json FreqTrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"batch", batch},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"max_steps", max_steps},
          {"eval_every", eval_every},
          {"patience", patience},
          {"eval_streams", eval_streams},
          {"queries_per_stream", queries_per_stream},
          {"log_every", log_every},
          {"seed", seed},
          {"threads", threads}};
}

FreqTrainConfig FreqTrainConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "model",      "batch",       "lr",        "weight_decay",       "max_steps",
      "eval_every", "patience",    "eval_streams", "queries_per_stream", "log_every",
      "seed",       "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw Error("FreqTrainConfig: unknown key '" + it.key() + "'");
  FreqTrainConfig c;
  if (j.contains("model")) c.model = FreqConfig::from_json(j.at("model"));
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.patience = j.value("patience", c.patience);
  c.eval_streams = j.value("eval_streams", c.eval_streams);
  c.queries_per_stream = j.value("queries_per_stream", c.queries_per_stream);
  c.log_every = j.value("log_every", c.log_every);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

FreqTrainResult train_freq(const FreqTrainConfig& cfg,
                           const std::function<void(std::size_t, double, double)>& progress) {
  cfg.validate();
  FreqModel model = init_freq_model(cfg.model, cfg.seed);
  AdamState adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  const std::uint64_t eval_seed = mix_seed(cfg.seed, 0xF7A1);
  StreamSpec spec = cfg.model.stream_spec();

  FreqTrainResult res;
  auto run_eval = [&](const FreqModel& m) {
    return eval_mae(rules_of(m), spec, cfg.eval_streams, eval_seed, cfg.threads).overall;
  };
  double best = run_eval(model);
  res.step0_mae = best;
  ParamStore best_params = clone_params(model.params);
  std::size_t evals_since_best = 0;
  std::size_t nthreads = std::max<std::size_t>(1, cfg.threads);

  std::size_t step = 0;
  bool stop = false;
  for (; step < cfg.max_steps && !stop; ++step) {
    std::vector<GradMap> grads(nthreads);
    std::vector<double> losses(nthreads, 0.0);
    std::vector<std::string> errors(nthreads);
    parallel_chunks(cfg.batch, nthreads, [&](std::size_t t, std::size_t lo, std::size_t hi) {
      try {
        ParamStore local = nthreads == 1 ? model.params : clone_params(model.params);
        for (std::size_t b = lo; b < hi; ++b) {
          std::uint64_t inst_id = static_cast<std::uint64_t>(step) * cfg.batch + b;
          StreamInstance stream =
              gen_stream(spec, spec.length, mix_seed(cfg.seed ^ 0x57EAull, inst_id));
          Rng noise_rng(mix_seed(cfg.seed ^ 0x6B6Bull, inst_id));
          Tape tape;
          Tensor loss =
              freq_instance_loss(tape, local, cfg.model, stream, cfg.queries_per_stream, noise_rng);
          losses[t] += loss.item();
          tape.backward(loss);
          for (const auto& name : local.names()) {
            const auto& pg = local.at(name).grad();
            if (pg.empty()) continue;
            auto& acc = grads[t][name];
            if (acc.empty()) acc.assign(pg.size(), 0.0);
            for (std::size_t j = 0; j < pg.size(); ++j) acc[j] += pg[j];
          }
        }
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    });
    for (const auto& e : errors)
      if (!e.empty()) throw Error(std::string("train_freq: ") + e);
    double batch_loss = 0.0;
    for (double l : losses) batch_loss += l;
    batch_loss /= static_cast<double>(cfg.batch);
    if (!std::isfinite(batch_loss)) {
      res.diverged = true;
      break;
    }
    GradMap merged;
    for (const auto& g : grads)
      for (const auto& [name, vec] : g) {
        auto& acc = merged[name];
        if (acc.empty()) acc.assign(vec.size(), 0.0);
        for (std::size_t j = 0; j < vec.size(); ++j) acc[j] += vec[j];
      }
    for (auto& [name, vec] : merged)
      for (auto& v : vec) v /= static_cast<double>(cfg.batch);
    adam_step(model.params, merged, adam);

    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.max_steps)
      res.loss_log.emplace_back(step + 1, batch_loss);
    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.max_steps) {
      double mae = run_eval(model);
      if (progress) progress(step + 1, batch_loss, mae);
      if (mae < best) {
        best = mae;
        best_params = clone_params(model.params);
        evals_since_best = 0;
      } else {
        evals_since_best += 1;
        if (evals_since_best >= cfg.patience) stop = true;
      }
    } else if (progress && (step + 1) % cfg.log_every == 0) {
      progress(step + 1, batch_loss, std::numeric_limits<double>::quiet_NaN());
    }
  }
  res.steps_run = step;
  res.best_mae = best;
  res.model = FreqModel{cfg.model, res.diverged ? std::move(model.params) : std::move(best_params)};
  res.adam = std::move(adam);
  return res;
}

}  // namespace dslab

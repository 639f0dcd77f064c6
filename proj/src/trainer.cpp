#include "dslab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <cmath>
#include <set>
#include <thread>

#include "dslab/baselines.hpp"
#include "dslab/ops.hpp"
#include "dslab/parallel.hpp"

namespace dslab {

namespace op = ops;

LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::Mse;
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  throw Error("unknown loss: " + s);
}

std::string to_string(LossKind k) { return k == LossKind::Mse ? "mse" : "cross_entropy"; }

void TrainConfig::validate() const {
  dist.validate();
  model.validate();
  if (batch == 0) throw Error("TrainConfig: batch must be positive");
  if (model.n != dist.n) throw Error("TrainConfig: model N does not match distribution N");
  if (model.dim != dist.d && dist.kind != DistKind::SyntheticRep)
    throw Error("TrainConfig: model dim does not match distribution d");
  if (loss == LossKind::CrossEntropy && model.no_permute())
    throw Error("TrainConfig: cross-entropy needs position supervision, which the no-permute "
                "ablation does not define");
  if (threads == 0) throw Error("TrainConfig: threads must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"dist", dist.to_json()},
          {"model", model.to_json()},
          {"loss", to_string(loss)},
          {"batch", batch},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"max_steps", max_steps},
          {"eval_every", eval_every},
          {"patience", patience},
          {"eval_instances", eval_instances},
          {"log_every", log_every},
          {"seed", seed},
          {"threads", threads}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "dist",     "model",    "loss",           "batch",     "lr",   "weight_decay",
      "max_steps", "eval_every", "patience",    "eval_instances", "log_every", "seed",
      "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw Error("TrainConfig: unknown key '" + it.key() + "'");
  }
  TrainConfig c;
  if (j.contains("dist")) c.dist = DistributionSpec::from_json(j.at("dist"));
  if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
  if (j.contains("loss")) c.loss = loss_from_string(j.at("loss"));
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.patience = j.value("patience", c.patience);
  c.eval_instances = j.value("eval_instances", c.eval_instances);
  c.log_every = j.value("log_every", c.log_every);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = {{"label", label},
                      {"accuracy", accuracy},
                      {"mse", mse},
                      {"wall_seconds", wall_seconds},
                      {"instances", instances}};
  if (std::isfinite(sortedness)) j["sortedness"] = sortedness;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.label = j.value("label", std::string{});
  r.accuracy = j.value("accuracy", std::vector<double>{});
  r.mse = j.value("mse", std::vector<double>{});
  r.sortedness = j.value("sortedness", std::numeric_limits<double>::quiet_NaN());
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.instances = j.value("instances", std::size_t{0});
  return r;
}

void EvalReport::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("EvalReport: cannot open " + path);
  os << to_json().dump(2) << "\n";
}

EvalReport EvalReport::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("EvalReport: cannot open " + path);
  nlohmann::json j;
  is >> j;
  return from_json(j);
}

Tensor nn_instance_loss(Tape& tape, const ParamStore& params, const ModelConfig& cfg,
                        const NNInstance& inst, LossKind loss, Rng& noise_rng) {
  Tensor d = Tensor::zeros({inst.dataset.size(), cfg.dim});
  for (std::size_t i = 0; i < inst.dataset.size(); ++i)
    for (std::size_t c = 0; c < cfg.dim; ++c) d.at(i, c) = inst.dataset[i][c];
  Tensor q = Tensor::zeros({1, cfg.dim});
  Tensor y = Tensor::zeros({1, cfg.dim});
  for (std::size_t c = 0; c < cfg.dim; ++c) {
    q.at(0, c) = inst.query[c];
    y.at(0, c) = inst.y_value[c];
  }
  BuildResult built = build_structure(&tape, params, cfg, d, RunMode::Train);
  TrainTrace trace = run_query_execution_train(&tape, params, cfg, q, built.structure, noise_rng);
  if (loss == LossKind::Mse) {
    Tensor diff = op::sub(&tape, trace.prediction, y);
    return op::sum_all(&tape, op::mul(&tape, diff, diff));
  }
  // cross-entropy against y's position in the currently permuted structure
  SoftPermutation hard = hard_sort(built.ranks.values());
  std::size_t target = hard.position_of(inst.y_index);
  Tensor z = op::scale(&tape,
                       op::add(&tape, trace.logits[trace.chosen_step],
                               trace.noise[trace.chosen_step]),
                       1.0 / cfg.gumbel_temperature);
  return op::cross_entropy_logits(&tape, z, target);
}

namespace {

struct EvalAccum {
  std::vector<double> acc;
  std::vector<double> mse;
  double sortedness = 0.0;
  std::size_t sortedness_n = 0;
};

EvalReport finish_eval(std::vector<EvalAccum>& parts, std::size_t m, std::size_t n,
                       const std::string& label, double wall, bool report_accuracy) {
  EvalReport r;
  r.label = label;
  r.instances = n;
  r.wall_seconds = wall;
  std::vector<double> acc(m, 0.0), mse(m, 0.0);
  double sort_sum = 0.0;
  std::size_t sort_n = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i) {
      acc[i] += p.acc[i];
      mse[i] += p.mse[i];
    }
    sort_sum += p.sortedness;
    sort_n += p.sortedness_n;
  }
  for (std::size_t i = 0; i < m; ++i) {
    acc[i] /= static_cast<double>(n);
    mse[i] /= static_cast<double>(n);
  }
  if (report_accuracy) r.accuracy = acc;
  r.mse = mse;
  if (sort_n > 0) r.sortedness = sort_sum / static_cast<double>(sort_n);
  return r;
}

}  // namespace

EvalReport evaluate_model(const NNModel& model, const DistributionSpec& spec,
                          std::size_t n_instances, std::uint64_t seed_base, std::size_t threads,
                          const std::string& label) {
  auto t0 = std::chrono::steady_clock::now();
  const ModelConfig& cfg = model.cfg;
  std::size_t m = cfg.m_lookups;
  std::size_t nthreads = std::max<std::size_t>(1, threads);
  std::vector<EvalAccum> parts(nthreads);
  parallel_chunks(n_instances, nthreads, [&](std::size_t t, std::size_t lo, std::size_t hi) {
    EvalAccum& acc = parts[t];
    acc.acc.assign(m, 0.0);
    acc.mse.assign(m, 0.0);
    for (std::size_t i = lo; i < hi; ++i) {
      NNInstance inst = sample_nn_instance(spec, mix_seed(seed_base, i));
      HardStructure hs = build_hard_structure(model.params, cfg, inst.dataset);
      LookupTrace tr = run_query_execution_eval(model.params, cfg, inst.query, hs);
      for (std::size_t k = 0; k < m; ++k) {
        if (!cfg.no_permute() && tr.best_so_far[k] == inst.y_value) acc.acc[k] += 1.0;
        acc.mse[k] += squared_distance(tr.best_so_far[k], inst.y_value);
      }
      if (cfg.dim == 1 && !cfg.no_permute()) {
        std::vector<double> flat(inst.dataset.size());
        for (std::size_t r = 0; r < flat.size(); ++r) flat[r] = inst.dataset[r][0];
        acc.sortedness += sortedness(hs.perm, flat);
        acc.sortedness_n += 1;
      }
    }
  });
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finish_eval(parts, m, n_instances, label, wall, !cfg.no_permute());
}

EvalReport evaluate_traces(const TraceFn& fn, const DistributionSpec& spec,
                           std::size_t n_instances, std::size_t m_lookups,
                           std::uint64_t seed_base, std::size_t threads,
                           const std::string& label) {
  auto t0 = std::chrono::steady_clock::now();
  std::size_t nthreads = std::max<std::size_t>(1, threads);
  std::vector<EvalAccum> parts(nthreads);
  parallel_chunks(n_instances, nthreads, [&](std::size_t t, std::size_t lo, std::size_t hi) {
    EvalAccum& acc = parts[t];
    acc.acc.assign(m_lookups, 0.0);
    acc.mse.assign(m_lookups, 0.0);
    for (std::size_t i = lo; i < hi; ++i) {
      std::uint64_t seed = mix_seed(seed_base, i);
      NNInstance inst = sample_nn_instance(spec, seed);
      LookupTrace tr = fn(inst, mix_seed(seed, 0xB0B));
      for (std::size_t k = 0; k < m_lookups; ++k) {
        // a trace may stop early (search finished); its final state carries
        std::size_t kk = std::min(k, tr.best_so_far.size() - 1);
        if (tr.best_so_far[kk] == inst.y_value) acc.acc[k] += 1.0;
        acc.mse[k] += squared_distance(tr.best_so_far[kk], inst.y_value);
      }
    }
  });
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return finish_eval(parts, m_lookups, n_instances, label, wall, true);
}

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  NNModel model = init_nn_model(cfg.model, cfg.seed);
  AdamState adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  TrainState state;
  return train_from(cfg, std::move(model), std::move(adam), std::move(state), progress);
}

TrainResult train_from(const TrainConfig& cfg, NNModel model, AdamState adam, TrainState state,
                       const ProgressFn& progress) {
  cfg.validate();
  const ModelConfig& mcfg = model.cfg;
  const bool frozen = mcfg.ablation == Ablation::Frozen;
  const std::uint64_t eval_seed = mix_seed(cfg.seed, 0xE7A1);

  TrainResult res;
  res.diverged = false;

  auto run_eval = [&](const ParamStore& ps) {
    NNModel snapshot{mcfg, ps};
    return evaluate_model(snapshot, cfg.dist, cfg.eval_instances, eval_seed, cfg.threads);
  };
  auto metric_of = [&](const EvalReport& r) {
    return mcfg.no_permute() ? -r.mse.back() : r.accuracy.back();
  };

  EvalReport ev = run_eval(model.params);
  if (state.start_step == 0) {
    res.step0_eval = ev;
    state.best_metric = metric_of(ev);
    state.best_params = clone_params(model.params);
    res.best_eval = ev;
    LogRow row;
    row.step = 0;
    row.train_loss = std::numeric_limits<double>::quiet_NaN();
    row.eval_accuracy = ev.accuracy;
    row.eval_mse_final = ev.mse.back();
    row.sortedness = ev.sortedness;
    res.log.push_back(row);
    if (progress) progress(row);
  } else {
    res.step0_eval = ev;  // evaluation at the resume point
    res.best_eval = ev;
  }

  std::size_t nthreads = std::max<std::size_t>(1, cfg.threads);
  bool stop = false;
  std::size_t step = state.start_step;
  for (; step < cfg.max_steps && !stop; ++step) {
    std::vector<GradMap> grads(nthreads);
    std::vector<double> losses(nthreads, 0.0);
    std::vector<std::string> errors(nthreads);
    parallel_chunks(cfg.batch, nthreads, [&](std::size_t t, std::size_t lo, std::size_t hi) {
      try {
        ParamStore local = nthreads == 1 ? model.params : clone_params(model.params);
        GradMap& g = grads[t];
        for (std::size_t k = lo; k < hi; ++k) {
          std::uint64_t inst_id = static_cast<std::uint64_t>(step) * cfg.batch + k;
          NNInstance inst =
              sample_nn_instance(cfg.dist, mix_seed(cfg.seed ^ 0xDA7Aull, inst_id));
          Rng noise_rng(mix_seed(cfg.seed ^ 0x6B6Bull, inst_id));
          Tape tape;
          Tensor loss = nn_instance_loss(tape, local, mcfg, inst, cfg.loss, noise_rng);
          losses[t] += loss.item();
          tape.backward(loss);
          for (const auto& name : local.names()) {
            if (frozen && name.rfind("dp.", 0) == 0) continue;
            const auto& pg = local.at(name).grad();
            if (pg.empty()) continue;
            auto& acc = g[name];
            if (acc.empty()) acc.assign(pg.size(), 0.0);
            for (std::size_t j = 0; j < pg.size(); ++j) acc[j] += pg[j];
          }
        }
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    });
    for (const auto& e : errors)
      if (!e.empty()) throw Error(std::string("train: ") + e);

    double batch_loss = 0.0;
    for (double l : losses) batch_loss += l;
    batch_loss /= static_cast<double>(cfg.batch);
    if (!std::isfinite(batch_loss)) {
      res.diverged = true;
      break;
    }
    GradMap merged;
    for (const auto& g : grads) {
      for (const auto& [name, vec] : g) {
        auto& acc = merged[name];
        if (acc.empty()) acc.assign(vec.size(), 0.0);
        for (std::size_t j = 0; j < vec.size(); ++j) acc[j] += vec[j];
      }
    }
    for (auto& [name, vec] : merged)
      for (auto& v : vec) v /= static_cast<double>(cfg.batch);
    adam_step(model.params, merged, adam);

    bool log_step = ((step + 1) % cfg.log_every == 0) || step + 1 == cfg.max_steps;
    bool eval_step = ((step + 1) % cfg.eval_every == 0) || step + 1 == cfg.max_steps;
    if (log_step || eval_step) {
      LogRow row;
      row.step = step + 1;
      row.train_loss = batch_loss;
      if (eval_step) {
        EvalReport e = run_eval(model.params);
        row.eval_accuracy = e.accuracy;
        row.eval_mse_final = e.mse.back();
        row.sortedness = e.sortedness;
        double metric = metric_of(e);
        if (metric > state.best_metric) {
          state.best_metric = metric;
          state.best_params = clone_params(model.params);
          state.evals_since_best = 0;
          res.best_eval = e;
        } else {
          state.evals_since_best += 1;
          if (state.evals_since_best >= cfg.patience) stop = true;
        }
      }
      res.log.push_back(row);
      if (progress) progress(row);
    }
  }
  res.steps_run = step;
  res.skipped_nonfinite = adam.skipped_nonfinite;
  if (state.best_params.names().empty() || res.diverged) {
    res.model = std::move(model);
  } else {
    res.model = NNModel{mcfg, std::move(state.best_params)};
  }
  res.adam = std::move(adam);
  return res;
}

TraceFn binary_search_fn(std::size_t budget) {
  return [budget](const NNInstance& inst, std::uint64_t) {
    std::vector<double> sorted(inst.dataset.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) sorted[i] = inst.dataset[i][0];
    std::sort(sorted.begin(), sorted.end());
    return binary_search_trace(sorted, inst.query[0], budget);
  };
}

TraceFn interpolation_search_fn(std::size_t budget) {
  return [budget](const NNInstance& inst, std::uint64_t) {
    std::vector<double> sorted(inst.dataset.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) sorted[i] = inst.dataset[i][0];
    std::sort(sorted.begin(), sorted.end());
    return interpolation_search_trace(sorted, inst.query[0], budget);
  };
}

TraceFn kdtree_fn(std::size_t budget) {
  return [budget](const NNInstance& inst, std::uint64_t) {
    KdTree tree = kd_build(inst.dataset);
    return kd_query(tree, inst.query, budget);
  };
}

TraceFn lsh_fn(std::size_t k, std::size_t budget) {
  return [k, budget](const NNInstance& inst, std::uint64_t seed) {
    LshTable table = lsh_build(inst.dataset, k, seed);
    return lsh_query(table, inst.query, budget, mix_seed(seed, 1));
  };
}

TraceFn bucket1d_fn(std::size_t t_buckets) {
  return [t_buckets](const NNInstance& inst, std::uint64_t) {
    Bucket1d b = bucket1d_build(inst.dataset, t_buckets);
    return bucket1d_query(b, inst.query[0]);
  };
}

TraceFn random_lookup_fn(std::size_t budget) {
  return [budget](const NNInstance& inst, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t n = inst.dataset.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    LookupTrace tr;
    for (std::size_t i = 0; i < std::min(budget, n); ++i) {
      tr.positions.push_back(idx[i]);
      tr.values.push_back(inst.dataset[idx[i]]);
    }
    finalize_trace(tr, inst.query);
    return tr;
  };
}

TraceFn oracle_fn() {
  return [](const NNInstance& inst, std::uint64_t) {
    LookupTrace tr;
    tr.positions.push_back(inst.y_index);
    tr.values.push_back(inst.y_value);
    finalize_trace(tr, inst.query);
    return tr;
  };
}

std::vector<std::string> preset_names() {
  return {"uniform1d",      "zipf1d",         "hard1d",       "uniform2d",     "hard2d",
          "sphere30d",      "extra_space_1d", "extra_space_30d", "synthetic_rep"};
}

TrainConfig make_preset(const std::string& name) {
  TrainConfig c;
  c.batch = 128;
  c.lr = 1e-3;
  c.weight_decay = 1e-3;
  c.eval_instances = 512;
  c.log_every = 100;
  c.threads = 2;
  c.model.enc_blocks = 2;
  c.model.enc_heads = 4;
  c.model.enc_width = 32;
  c.model.query_width = 128;
  if (name == "uniform1d") {
    c.dist.kind = DistKind::Uniform1d;
    c.dist.n = 16;
    c.dist.d = 1;
    c.model.n = 16;
    c.model.dim = 1;
    c.model.m_lookups = 4;
    c.loss = LossKind::Mse;
    c.max_steps = 6000;
    c.eval_every = 500;
    c.patience = 12;
  } else if (name == "zipf1d") {
    c.dist.kind = DistKind::Zipf1d;
    c.dist.n = 16;
    c.dist.d = 1;
    c.dist.universe = 200;
    c.dist.alpha = 1.2;
    c.model.n = 16;
    c.model.dim = 1;
    c.model.m_lookups = 4;
    c.loss = LossKind::CrossEntropy;
    c.max_steps = 8000;
    c.eval_every = 500;
    c.patience = 12;
  } else if (name == "hard1d") {
    c.dist.kind = DistKind::Hard1d;
    c.dist.n = 15;
    c.dist.d = 1;
    c.dist.hard_a = 7.0;
    c.model.n = 15;
    c.model.dim = 1;
    c.model.m_lookups = 3;
    c.loss = LossKind::CrossEntropy;
    c.max_steps = 10000;
    c.eval_every = 500;
    c.patience = 14;
  } else if (name == "uniform2d") {
    c.dist.kind = DistKind::Uniform2d;
    c.dist.n = 16;
    c.dist.d = 2;
    c.model.n = 16;
    c.model.dim = 2;
    c.model.m_lookups = 4;
    c.loss = LossKind::Mse;
    c.max_steps = 8000;
    c.eval_every = 500;
    c.patience = 12;
  } else if (name == "hard2d") {
    c.dist.kind = DistKind::Hard2d;
    c.dist.n = 15;
    c.dist.d = 2;
    c.model.n = 15;
    c.model.dim = 2;
    c.model.m_lookups = 3;
    c.loss = LossKind::CrossEntropy;
    c.max_steps = 10000;
    c.eval_every = 500;
    c.patience = 14;
  } else if (name == "sphere30d") {
    c.dist.kind = DistKind::Hypersphere;
    c.dist.n = 16;
    c.dist.d = 30;
    c.dist.rho = 0.8;
    c.model.n = 16;
    c.model.dim = 30;
    c.model.m_lookups = 3;
    c.loss = LossKind::CrossEntropy;
    c.max_steps = 8000;
    c.eval_every = 500;
    c.patience = 12;
  } else if (name == "extra_space_1d") {
    c.dist.kind = DistKind::Uniform1d;
    c.dist.n = 50;
    c.dist.d = 1;
    c.model.n = 50;
    c.model.dim = 1;
    c.model.m_lookups = 2;
    c.model.extra_tokens = 8;  // sweep point; the suite iterates T
    c.loss = LossKind::Mse;
    c.max_steps = 8000;
    c.eval_every = 500;
    c.patience = 12;
  } else if (name == "extra_space_30d") {
    c.dist.kind = DistKind::Hypersphere;
    c.dist.n = 16;
    c.dist.d = 30;
    c.dist.rho = 0.8;
    c.model.n = 16;
    c.model.dim = 30;
    c.model.m_lookups = 2;
    c.model.extra_tokens = 8;
    c.loss = LossKind::CrossEntropy;
    c.max_steps = 8000;
    c.eval_every = 500;
    c.patience = 12;
  } else if (name == "synthetic_rep") {
    c.dist.kind = DistKind::SyntheticRep;
    c.dist.n = 50;
    c.dist.d = 16;
    c.dist.labels = 200;
    c.dist.rep_sigma = 0.05;
    c.model.n = 50;
    c.model.dim = 16;
    c.model.m_lookups = 6;
    c.loss = LossKind::CrossEntropy;
    c.max_steps = 12000;
    c.eval_every = 500;
    c.patience = 14;
  } else {
    throw Error("unknown preset: " + name + " (available: uniform1d, zipf1d, hard1d, uniform2d, "
                "hard2d, sphere30d, extra_space_1d, extra_space_30d, synthetic_rep)");
  }
  return c;
}

bool accuracy_nondecreasing(const EvalReport& r, double tol) {
  for (std::size_t i = 1; i < r.accuracy.size(); ++i)
    if (r.accuracy[i] + tol < r.accuracy[i - 1]) return false;
  return true;
}

bool mse_nonincreasing(const EvalReport& r, double tol) {
  for (std::size_t i = 1; i < r.mse.size(); ++i)
    if (r.mse[i] > r.mse[i - 1] + tol) return false;
  return true;
}

}  // namespace dslab

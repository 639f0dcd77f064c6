#include "dslab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "dslab/tensor.hpp"  // for Error

namespace dslab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

DistKind dist_kind_from_string(const std::string& s) {
  if (s == "uniform1d") return DistKind::Uniform1d;
  if (s == "zipf1d") return DistKind::Zipf1d;
  if (s == "hard1d") return DistKind::Hard1d;
  if (s == "uniform2d") return DistKind::Uniform2d;
  if (s == "hard2d") return DistKind::Hard2d;
  if (s == "hypersphere") return DistKind::Hypersphere;
  if (s == "synthetic_rep") return DistKind::SyntheticRep;
  throw Error("unknown distribution kind: " + s);
}

std::string to_string(DistKind k) {
  switch (k) {
    case DistKind::Uniform1d: return "uniform1d";
    case DistKind::Zipf1d: return "zipf1d";
    case DistKind::Hard1d: return "hard1d";
    case DistKind::Uniform2d: return "uniform2d";
    case DistKind::Hard2d: return "hard2d";
    case DistKind::Hypersphere: return "hypersphere";
    case DistKind::SyntheticRep: return "synthetic_rep";
  }
  return "?";
}

void DistributionSpec::validate() const {
  if (n == 0) throw Error("DistributionSpec: N must be positive");
  if (alpha < 0.0) throw Error("DistributionSpec: alpha must be nonnegative");
  if (hard_a <= 1.0) throw Error("DistributionSpec: hard-distribution a must exceed 1");
  if (rho < 0.0 || rho > 1.0) throw Error("DistributionSpec: rho must lie in [0,1]");
  switch (kind) {
    case DistKind::Uniform1d:
    case DistKind::Hard1d:
      if (d != 1) throw Error("DistributionSpec: 1-D kind requires d=1");
      break;
    case DistKind::Zipf1d:
      if (d != 1) throw Error("DistributionSpec: 1-D kind requires d=1");
      if (universe < n) throw Error("DistributionSpec: universe smaller than N");
      break;
    case DistKind::Uniform2d:
    case DistKind::Hard2d:
      if (d != 2) throw Error("DistributionSpec: 2-D kind requires d=2");
      break;
    case DistKind::Hypersphere:
      if (d < 2) throw Error("DistributionSpec: hypersphere requires d >= 2");
      break;
    case DistKind::SyntheticRep:
      if (n > labels) throw Error("DistributionSpec: N must not exceed label count");
      break;
  }
}

nlohmann::json DistributionSpec::to_json() const {
  return {{"kind", to_string(kind)}, {"n", n},           {"d", d},
          {"alpha", alpha},          {"hard_a", hard_a}, {"rho", rho},
          {"universe", universe},    {"labels", labels}, {"rep_sigma", rep_sigma}};
}

DistributionSpec DistributionSpec::from_json(const nlohmann::json& j) {
  DistributionSpec s;
  s.kind = dist_kind_from_string(j.at("kind").get<std::string>());
  s.n = j.value("n", s.n);
  s.d = j.value("d", s.d);
  s.alpha = j.value("alpha", s.alpha);
  s.hard_a = j.value("hard_a", s.hard_a);
  s.rho = j.value("rho", s.rho);
  s.universe = j.value("universe", s.universe);
  s.labels = j.value("labels", s.labels);
  s.rep_sigma = j.value("rep_sigma", s.rep_sigma);
  s.validate();
  return s;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t brute_force_nn(const std::vector<std::vector<double>>& dataset,
                           const std::vector<double>& query) {
  if (dataset.empty()) throw Error("brute_force_nn: empty dataset");
  std::size_t best = 0;
  double best_d = squared_distance(dataset[0], query);
  for (std::size_t i = 1; i < dataset.size(); ++i) {
    double d = squared_distance(dataset[i], query);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

ZipfSampler::ZipfSampler(double alpha, std::size_t k, bool permute_ranks, Rng& rng) {
  if (k == 0) throw Error("ZipfSampler: empty universe");
  if (alpha < 0.0) throw Error("ZipfSampler: alpha must be nonnegative");
  prob_.resize(k);
  double z = 0.0;
  for (std::size_t i = 1; i <= k; ++i) z += std::pow(static_cast<double>(i), -alpha);
  for (std::size_t i = 1; i <= k; ++i)
    prob_[i - 1] = std::pow(static_cast<double>(i), -alpha) / z;
  cum_.resize(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += prob_[i];
    cum_[i] = acc;
  }
  cum_.back() = 1.0;
  rank_to_elem_.resize(k);
  std::iota(rank_to_elem_.begin(), rank_to_elem_.end(), std::int64_t{1});
  if (permute_ranks) rng.shuffle(rank_to_elem_);
}

std::int64_t ZipfSampler::sample(Rng& rng) const {
  double u = rng.uniform();
  std::size_t rank = static_cast<std::size_t>(
      std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
  if (rank >= cum_.size()) rank = cum_.size() - 1;
  return rank_to_elem_[rank];
}

double ZipfSampler::prob_of_rank(std::size_t rank) const {
  if (rank == 0 || rank > prob_.size()) throw Error("ZipfSampler: rank out of range");
  return prob_[rank - 1];
}

std::int64_t ZipfSampler::element_of_rank(std::size_t rank) const {
  if (rank == 0 || rank > rank_to_elem_.size()) throw Error("ZipfSampler: rank out of range");
  return rank_to_elem_[rank - 1];
}

std::vector<double> sample_hard_tree(std::size_t n, double a, Rng& rng) {
  if (n == 0) throw Error("sample_hard_tree: N must be positive");
  if (a <= 1.0) throw Error("sample_hard_tree: a must exceed 1");
  double log_n = std::log2(static_cast<double>(n));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    // complete binary tree in heap order; level of node i is floor(log2(i+1))
    double level = std::floor(std::log2(static_cast<double>(i) + 1.0));
    double range = std::pow(a, log_n - level);
    double d = rng.uniform(0.0, range);
    if (i == 0) {
      x[0] = d;
    } else {
      std::size_t parent = (i - 1) / 2;
      bool left = (i % 2 == 1);
      x[i] = left ? x[parent] - d : x[parent] + d;
    }
  }
  return x;
}

std::vector<double> sample_hard(std::size_t n, double a, Rng& rng) {
  std::vector<double> x = sample_hard_tree(n, a, rng);
  rng.shuffle(x);
  return x;
}

std::vector<double> sample_hard_query(const std::vector<std::vector<double>>& dataset, Rng& rng,
                                      double noise_scale) {
  if (dataset.empty()) throw Error("sample_hard_query: empty dataset");
  std::size_t i = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(dataset.size()) - 1));
  std::vector<double> q = dataset[i];
  for (auto& v : q) v += noise_scale * rng.normal();
  return q;
}

namespace {

std::vector<double> random_unit_vector(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

void sample_hypersphere_pair(std::size_t d, double rho, Rng& rng, std::vector<double>& x,
                             std::vector<double>& q) {
  if (rho < 0.0 || rho > 1.0) throw Error("sample_hypersphere_pair: rho must lie in [0,1]");
  if (d < 2 && rho < 1.0) throw Error("sample_hypersphere_pair: d >= 2 required for rho < 1");
  x = random_unit_vector(d, rng);
  if (rho == 1.0) {
    q = x;
    return;
  }
  // u: random unit vector orthogonal to x
  std::vector<double> u;
  double un = 0.0;
  do {
    u = random_unit_vector(d, rng);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += u[i] * x[i];
    un = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      u[i] -= dot * x[i];
      un += u[i] * u[i];
    }
  } while (un < 1e-12);
  un = std::sqrt(un);
  q.resize(d);
  double w = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < d; ++i) q[i] = rho * x[i] + w * u[i] / un;
}

std::vector<double> synthetic_rep_embedding(std::int64_t label, std::size_t labels,
                                            std::size_t d) {
  // W is a fixed seeded d x 3 map shared by every instance of a given (L, d).
  // The slow components give the curve its global 1-D order; the sin(14*pi*f)
  // term keeps neighboring labels farther apart than the sigma=0.05 sample
  // noise, so label-nearest is embedding-nearest with high probability.
  Rng wrng(mix_seed(0x5e1fceull, (static_cast<std::uint64_t>(labels) << 16) ^ d));
  double f = static_cast<double>(label) / static_cast<double>(labels);
  double feat[3] = {f, std::sin(2.0 * kPi * f), std::sin(14.0 * kPi * f)};
  std::vector<double> e(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += 1.5 * wrng.normal() * feat[j];
    e[i] = std::tanh(s);
  }
  return e;
}

NNInstance sample_synthetic_rep_instance(std::size_t labels, std::size_t d, std::size_t n,
                                         double sigma, Rng& rng) {
  if (n > labels) throw Error("sample_synthetic_rep_instance: N must not exceed label count");
  std::vector<std::int64_t> all(labels);
  std::iota(all.begin(), all.end(), std::int64_t{0});
  rng.shuffle(all);
  NNInstance inst;
  inst.labels.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  inst.dataset.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst.dataset[i] = synthetic_rep_embedding(inst.labels[i], labels, d);
    for (auto& v : inst.dataset[i]) v += sigma * rng.normal();
  }
  std::size_t qi = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  inst.query_label = inst.labels[qi];
  inst.query = synthetic_rep_embedding(inst.query_label, labels, d);
  for (auto& v : inst.query) v += sigma * rng.normal();
  // nearest is defined over the label space: the unique point sharing the label
  inst.y_index = qi;
  inst.y_value = inst.dataset[qi];
  return inst;
}

NNInstance sample_nn_instance(const DistributionSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  NNInstance inst;
  switch (spec.kind) {
    case DistKind::Uniform1d: {
      inst.dataset.resize(spec.n);
      for (auto& row : inst.dataset) row = {rng.uniform(-1.0, 1.0)};
      inst.query = {rng.uniform(-1.0, 1.0)};
      break;
    }
    case DistKind::Zipf1d: {
      // dataset: N distinct values drawn uniformly from {1..K}
      std::vector<std::int64_t> vals(spec.universe);
      std::iota(vals.begin(), vals.end(), std::int64_t{1});
      rng.shuffle(vals);
      inst.dataset.resize(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i)
        inst.dataset[i] = {static_cast<double>(vals[i])};
      ZipfSampler zipf(spec.alpha, spec.universe, /*permute_ranks=*/false, rng);
      inst.query = {static_cast<double>(zipf.sample(rng))};
      break;
    }
    case DistKind::Hard1d: {
      auto xs = sample_hard(spec.n, spec.hard_a, rng);
      inst.dataset.resize(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) inst.dataset[i] = {xs[i]};
      inst.query = sample_hard_query(inst.dataset, rng);
      break;
    }
    case DistKind::Uniform2d: {
      inst.dataset.resize(spec.n);
      for (auto& row : inst.dataset) row = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      inst.query = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      break;
    }
    case DistKind::Hard2d: {
      auto xs = sample_hard(spec.n, spec.hard_a, rng);
      auto ys = sample_hard(spec.n, spec.hard_a, rng);
      inst.dataset.resize(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) inst.dataset[i] = {xs[i], ys[i]};
      inst.query = sample_hard_query(inst.dataset, rng);
      break;
    }
    case DistKind::Hypersphere: {
      inst.dataset.resize(spec.n);
      for (auto& row : inst.dataset) row = random_unit_vector(spec.d, rng);
      std::size_t target = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(spec.n) - 1));
      std::vector<double> x, q;
      sample_hypersphere_pair(spec.d, spec.rho, rng, x, q);
      inst.dataset[target] = x;
      inst.query = q;
      break;
    }
    case DistKind::SyntheticRep:
      return sample_synthetic_rep_instance(spec.labels, spec.d, spec.n, spec.rep_sigma, rng);
  }
  inst.y_index = brute_force_nn(inst.dataset, inst.query);
  inst.y_value = inst.dataset[inst.y_index];
  return inst;
}

nlohmann::json StreamSpec::to_json() const {
  return {{"universe", universe},
          {"alpha", alpha},
          {"length", length},
          {"permute_ranks", permute_ranks}};
}

StreamSpec StreamSpec::from_json(const nlohmann::json& j) {
  StreamSpec s;
  s.universe = j.value("universe", s.universe);
  s.alpha = j.value("alpha", s.alpha);
  s.length = j.value("length", s.length);
  s.permute_ranks = j.value("permute_ranks", s.permute_ranks);
  if (s.universe == 0) throw Error("StreamSpec: empty universe");
  if (s.length == 0) throw Error("StreamSpec: zero-length stream");
  return s;
}

StreamInstance gen_stream(const StreamSpec& spec, std::size_t t_len, std::uint64_t seed) {
  if (t_len == 0) throw Error("gen_stream: T must be positive");
  Rng rng(seed);
  ZipfSampler zipf(spec.alpha, spec.universe, spec.permute_ranks, rng);
  StreamInstance s;
  s.elements.resize(t_len);
  for (auto& e : s.elements) e = zipf.sample(rng);
  std::unordered_map<std::int64_t, std::int64_t> counts;
  s.queries.resize(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    counts[s.elements[t]] += 1;
    std::int64_t qe = zipf.sample(rng);
    auto it = counts.find(qe);
    s.queries[t] = {t + 1, qe, it == counts.end() ? 0 : it->second};
  }
  return s;
}

namespace {

nlohmann::json instance_to_json(const NNInstance& inst) {
  nlohmann::json j;
  j["D"] = inst.dataset;
  j["q"] = inst.query;
  j["y_index"] = inst.y_index;
  if (!inst.labels.empty()) {
    j["labels"] = inst.labels;
    j["q_label"] = inst.query_label;
  }
  return j;
}

NNInstance instance_from_json(const nlohmann::json& j) {
  NNInstance inst;
  inst.dataset = j.at("D").get<std::vector<std::vector<double>>>();
  inst.query = j.at("q").get<std::vector<double>>();
  inst.y_index = j.at("y_index").get<std::size_t>();
  if (inst.y_index >= inst.dataset.size()) throw Error("instance record: y_index out of range");
  inst.y_value = inst.dataset[inst.y_index];
  if (j.contains("labels")) {
    inst.labels = j.at("labels").get<std::vector<std::int64_t>>();
    inst.query_label = j.at("q_label").get<std::int64_t>();
  }
  return inst;
}

}  // namespace

void write_instances(const std::string& path, const DistributionSpec& spec,
                     const std::vector<std::uint64_t>& seeds,
                     const std::vector<NNInstance>& instances) {
  if (seeds.size() != instances.size()) throw Error("write_instances: seeds/instances mismatch");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_instances: cannot open " + path);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    nlohmann::json j = instance_to_json(instances[i]);
    j["spec"] = spec.to_json();
    j["seed"] = seeds[i];
    os << j.dump() << "\n";
  }
}

InstanceFile load_instances(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("load_instances: cannot open " + path);
  InstanceFile f;
  std::string line;
  std::size_t lineno = 0;
  bool have_spec = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw Error("load_instances: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_spec) {
      f.spec = DistributionSpec::from_json(j.at("spec"));
      have_spec = true;
    }
    f.seeds.push_back(j.value("seed", std::uint64_t{0}));
    NNInstance inst = instance_from_json(j);
    // re-verify the stored answer against the brute-force oracle
    if (f.spec.metric() == Metric::Euclidean) {
      std::size_t check = brute_force_nn(inst.dataset, inst.query);
      if (check != inst.y_index)
        throw Error("load_instances: " + path + ":" + std::to_string(lineno) +
                    ": stored y_index fails brute-force recheck");
    }
    f.instances.push_back(std::move(inst));
  }
  if (!have_spec) throw Error("load_instances: " + path + " holds no records");
  return f;
}

}  // namespace dslab

#include "dslab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "dslab/baselines.hpp"

namespace dslab {

std::vector<double> least_squares(const std::vector<std::vector<double>>& x,
                                  const std::vector<double>& y) {
  std::size_t n = x.size();
  if (n == 0 || y.size() != n) throw Error("least_squares: bad inputs");
  std::size_t p = x[0].size();
  if (n < p) throw Error("least_squares: fewer rows than columns");
  // Householder QR applied to [A | b]
  std::vector<std::vector<double>> a = x;
  std::vector<double> b = y;
  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a[i][k] * a[i][k];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error("least_squares: singular design matrix");
    double alpha = a[k][k] > 0 ? -norm : norm;
    std::vector<double> v(n, 0.0);
    v[k] = a[k][k] - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a[i][k];
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    for (std::size_t j = k; j < p; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i] * a[i][j];
      double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) a[i][j] -= f * v[i];
    }
    double dotb = 0.0;
    for (std::size_t i = k; i < n; ++i) dotb += v[i] * b[i];
    double fb = 2.0 * dotb / vnorm2;
    for (std::size_t i = k; i < n; ++i) b[i] -= fb * v[i];
  }
  std::vector<double> beta(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < p; ++j) s -= a[k][j] * beta[j];
    if (a[k][k] == 0.0) throw Error("least_squares: singular design matrix");
    beta[k] = s / a[k][k];
  }
  return beta;
}

PcaResult pca_top_components(const std::vector<std::vector<double>>& rows,
                             std::size_t n_components, double tol, std::size_t max_iter) {
  std::size_t m = rows.size();
  if (m == 0) throw Error("pca_top_components: no rows");
  std::size_t d = rows[0].size();
  n_components = std::min(n_components, std::min(m, d));
  // center
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(m);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(m);
  double total_var = 0.0;
  for (std::size_t i = 0; i < d; ++i) total_var += c[i][i];

  // orthogonal iteration
  Rng rng(0x9CA0);
  std::vector<std::vector<double>> q(n_components, std::vector<double>(d));
  for (auto& col : q)
    for (auto& v : col) v = rng.normal();
  auto orthonormalize = [&](std::vector<std::vector<double>>& basis) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      for (std::size_t k = 0; k < i; ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += basis[i][j] * basis[k][j];
        for (std::size_t j = 0; j < d; ++j) basis[i][j] -= dot * basis[k][j];
      }
      double norm = 0.0;
      for (double v : basis[i]) norm += v * v;
      norm = std::sqrt(norm);
      if (norm == 0.0) throw Error("pca_top_components: degenerate basis");
      for (double& v : basis[i]) v /= norm;
    }
  };
  orthonormalize(q);
  std::vector<double> eig(n_components, 0.0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::vector<std::vector<double>> z(n_components, std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < n_components; ++r)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) z[r][i] += c[i][j] * q[r][j];
    std::vector<double> new_eig(n_components);
    for (std::size_t r = 0; r < n_components; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += z[r][j] * q[r][j];
      new_eig[r] = dot;
    }
    q = z;
    orthonormalize(q);
    double delta = 0.0;
    for (std::size_t r = 0; r < n_components; ++r)
      delta = std::max(delta, std::abs(new_eig[r] - eig[r]) / (std::abs(new_eig[r]) + 1e-30));
    eig = new_eig;
    if (delta < tol && it > 2) break;
  }
  // canonical sign: largest-magnitude coordinate positive
  for (auto& comp : q) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
    if (comp[arg] < 0)
      for (double& v : comp) v = -v;
  }
  PcaResult res;
  res.components = q;
  res.explained.resize(n_components);
  for (std::size_t r = 0; r < n_components; ++r)
    res.explained[r] = total_var > 0 ? eig[r] / total_var : 0.0;
  return res;
}

double LogisticModel::predict(const std::vector<double>& x) const {
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
  return 1.0 / (1.0 + std::exp(-z));
}

LogisticModel fit_logistic(const std::vector<std::vector<double>>& x,
                           const std::vector<int>& labels, std::size_t iters, double lr,
                           double l2) {
  std::size_t n = x.size();
  if (n == 0 || labels.size() != n) throw Error("fit_logistic: bad inputs");
  std::size_t d = x[0].size();
  LogisticModel m;
  m.weights.assign(d, 0.0);
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double err = m.predict(x[i]) - static_cast<double>(labels[i]);
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * x[i][j];
      gb += err;
    }
    for (std::size_t j = 0; j < d; ++j)
      m.weights[j] -= lr * (gw[j] / static_cast<double>(n) + l2 * m.weights[j]);
    m.bias -= lr * gb / static_cast<double>(n);
  }
  return m;
}

namespace {

LookupHistogram histogram_from_pairs(std::vector<std::pair<double, std::size_t>>& pairs,
                                     std::size_t n_positions, std::size_t query_bins) {
  LookupHistogram h;
  h.overall.assign(n_positions, 0.0);
  for (const auto& [q, p] : pairs) {
    (void)q;
    h.overall[p] += 1.0;
  }
  double total = static_cast<double>(pairs.size());
  for (double& v : h.overall) v /= total;
  if (query_bins <= 1) {
    h.by_bin.push_back(h.overall);
    return h;
  }
  std::sort(pairs.begin(), pairs.end());
  h.by_bin.assign(query_bins, std::vector<double>(n_positions, 0.0));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t bin = i * query_bins / pairs.size();
    h.by_bin[bin][pairs[i].second] += 1.0;
  }
  for (auto& bin : h.by_bin) {
    double s = std::accumulate(bin.begin(), bin.end(), 0.0);
    if (s > 0)
      for (double& v : bin) v /= s;
  }
  return h;
}

}  // namespace

LookupHistogram lookup_histogram(const NNModel& model, const DistributionSpec& spec,
                                 std::size_t n_instances, std::size_t step_index,
                                 std::uint64_t seed_base, std::size_t query_bins) {
  if (step_index >= model.cfg.m_lookups) throw Error("lookup_histogram: step out of range");
  std::vector<std::pair<double, std::size_t>> pairs;
  pairs.reserve(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) {
    NNInstance inst = sample_nn_instance(spec, mix_seed(seed_base, i));
    HardStructure hs = build_hard_structure(model.params, model.cfg, inst.dataset);
    LookupTrace tr = run_query_execution_eval(model.params, model.cfg, inst.query, hs);
    pairs.emplace_back(inst.query[0], tr.positions[step_index]);
  }
  return histogram_from_pairs(pairs, model.cfg.structure_rows(), query_bins);
}

LookupHistogram lookup_histogram_traces(
    const std::function<LookupTrace(const NNInstance&, std::uint64_t)>& fn,
    const DistributionSpec& spec, std::size_t n_instances, std::size_t step_index,
    std::size_t n_positions, std::uint64_t seed_base, std::size_t query_bins) {
  std::vector<std::pair<double, std::size_t>> pairs;
  pairs.reserve(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) {
    std::uint64_t seed = mix_seed(seed_base, i);
    NNInstance inst = sample_nn_instance(spec, seed);
    LookupTrace tr = fn(inst, mix_seed(seed, 0xB0B));
    std::size_t idx = std::min(step_index, tr.positions.size() - 1);
    pairs.emplace_back(inst.query[0], tr.positions[idx]);
  }
  return histogram_from_pairs(pairs, n_positions, query_bins);
}

namespace {

AdjacencyDistanceMatrix adjacency_from_order(
    const DistributionSpec& spec, std::size_t n_instances, std::uint64_t seed_base,
    const std::function<std::vector<std::size_t>(const NNInstance&)>& order_of) {
  if (spec.d != 2) throw Error("adjacency_distance_matrix: requires a 2-D spec");
  std::size_t n = spec.n;
  AdjacencyDistanceMatrix m;
  m.dim1.assign(n, std::vector<double>(n, 0.0));
  m.dim2.assign(n, std::vector<double>(n, 0.0));
  m.combined.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n_instances; ++s) {
    NNInstance inst = sample_nn_instance(spec, mix_seed(seed_base, s));
    std::vector<std::size_t> order = order_of(inst);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const auto& a = inst.dataset[order[i]];
        const auto& b = inst.dataset[order[j]];
        double dx = std::abs(a[0] - b[0]);
        double dy = std::abs(a[1] - b[1]);
        m.dim1[i][j] += dx / static_cast<double>(n_instances);
        m.dim2[i][j] += dy / static_cast<double>(n_instances);
        m.combined[i][j] += std::sqrt(dx * dx + dy * dy) / static_cast<double>(n_instances);
      }
  }
  return m;
}

void kd_inorder(const KdTree& tree, int node_id, std::vector<std::size_t>& order) {
  if (node_id < 0) return;
  const KdNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
  if (node.point >= 0) {
    order.push_back(static_cast<std::size_t>(node.point));
    return;
  }
  kd_inorder(tree, node.left, order);
  kd_inorder(tree, node.right, order);
}

}  // namespace

AdjacencyDistanceMatrix adjacency_distance_matrix(const NNModel& model,
                                                  const DistributionSpec& spec,
                                                  std::size_t n_instances,
                                                  std::uint64_t seed_base) {
  return adjacency_from_order(spec, n_instances, seed_base, [&](const NNInstance& inst) {
    HardStructure hs = build_hard_structure(model.params, model.cfg, inst.dataset);
    return hs.perm.perm;
  });
}

AdjacencyDistanceMatrix adjacency_distance_matrix_kdtree(const DistributionSpec& spec,
                                                         std::size_t n_instances,
                                                         std::uint64_t seed_base) {
  return adjacency_from_order(spec, n_instances, seed_base, [&](const NNInstance& inst) {
    KdTree tree = kd_build(inst.dataset);
    std::vector<std::size_t> order;
    kd_inorder(tree, tree.root, order);
    return order;
  });
}

TokenRegression extra_space_regression(const NNModel& model, const DistributionSpec& spec,
                                       std::size_t n_instances, std::uint64_t seed_base) {
  const ModelConfig& cfg = model.cfg;
  if (cfg.extra_tokens == 0) throw Error("extra_space_regression: model has no extra tokens");
  if (spec.d != 1) throw Error("extra_space_regression: requires a 1-D spec");
  if (n_instances < cfg.n + 2)
    throw Error("extra_space_regression: need at least N+2 = " + std::to_string(cfg.n + 2) +
                " instances for a full-rank design, got " + std::to_string(n_instances));
  std::vector<std::vector<double>> design;  // sorted inputs + intercept column
  std::vector<std::vector<double>> token_values(cfg.extra_tokens);
  for (std::size_t i = 0; i < n_instances; ++i) {
    NNInstance inst = sample_nn_instance(spec, mix_seed(seed_base, i));
    HardStructure hs = build_hard_structure(model.params, cfg, inst.dataset);
    std::vector<double> row(cfg.n + 1, 1.0);
    std::vector<double> flat(cfg.n);
    for (std::size_t r = 0; r < cfg.n; ++r) flat[r] = inst.dataset[r][0];
    std::sort(flat.begin(), flat.end());
    for (std::size_t r = 0; r < cfg.n; ++r) row[r] = flat[r];
    design.push_back(std::move(row));
    for (std::size_t t = 0; t < cfg.extra_tokens; ++t)
      token_values[t].push_back(hs.rows[cfg.n + t][0]);
  }
  TokenRegression reg;
  for (std::size_t t = 0; t < cfg.extra_tokens; ++t) {
    std::vector<double> beta = least_squares(design, token_values[t]);
    double mean = std::accumulate(token_values[t].begin(), token_values[t].end(), 0.0) /
                  static_cast<double>(n_instances);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < n_instances; ++i) {
      double pred = 0.0;
      for (std::size_t j = 0; j < cfg.n + 1; ++j) pred += design[i][j] * beta[j];
      ss_res += (token_values[t][i] - pred) * (token_values[t][i] - pred);
      ss_tot += (token_values[t][i] - mean) * (token_values[t][i] - mean);
    }
    reg.intercepts.push_back(beta[cfg.n]);
    beta.resize(cfg.n);
    reg.coefficients.push_back(std::move(beta));
    reg.r_squared.push_back(ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0);
  }
  return reg;
}

PartitionProbe partition_probe(const std::function<int(const NNInstance&)>& position_fn,
                               const DistributionSpec& spec, std::size_t n_queries,
                               std::size_t n_positions, std::uint64_t seed_base) {
  PartitionProbe probe;
  std::vector<std::vector<double>> queries;
  std::vector<int> positions;
  for (std::size_t i = 0; i < n_queries; ++i) {
    NNInstance inst = sample_nn_instance(spec, mix_seed(seed_base, i));
    int pos = position_fn(inst);
    queries.push_back(inst.query);
    positions.push_back(pos);
    if (i < 64) {  // a handful of instances' data points for the scatter
      for (std::size_t r = 0; r < inst.dataset.size(); ++r) {
        probe.data_proj.push_back(inst.dataset[r]);  // projected later
        probe.data_positions.push_back(-1);          // filled by the model overload
      }
    }
  }
  std::vector<std::size_t> counts(n_positions, 0);
  for (int p : positions) counts[static_cast<std::size_t>(p)] += 1;
  for (std::size_t p = 0; p < n_positions; ++p) {
    if (counts[p] == 0) {
      probe.skipped_positions.push_back(static_cast<int>(p));
      continue;
    }
    probe.observed_positions.push_back(static_cast<int>(p));
    std::vector<int> labels(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
      labels[i] = positions[i] == static_cast<int>(p) ? 1 : 0;
    LogisticModel m = fit_logistic(queries, labels);
    probe.coefficients.push_back(m.weights);
  }
  if (probe.coefficients.size() < 2)
    throw Error("partition_probe: need at least two observed positions");
  probe.pca = pca_top_components(probe.coefficients, 2);
  auto project = [&](const std::vector<double>& v) {
    std::vector<double> out(2, 0.0);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t j = 0; j < v.size(); ++j) out[c] += probe.pca.components[c][j] * v[j];
    return out;
  };
  for (std::size_t i = 0; i < queries.size(); ++i) {
    probe.query_proj.push_back(project(queries[i]));
    probe.query_positions.push_back(positions[i]);
  }
  for (auto& dp : probe.data_proj) dp = project(dp);
  return probe;
}

PartitionProbe partition_probe_model(const NNModel& model, const DistributionSpec& spec,
                                     std::size_t n_queries, std::uint64_t seed_base) {
  std::vector<int> perm_positions;  // permuted position of every collected data point
  std::size_t collected = 0;
  auto fn = [&](const NNInstance& inst) {
    HardStructure hs = build_hard_structure(model.params, model.cfg, inst.dataset);
    LookupTrace tr = run_query_execution_eval(model.params, model.cfg, inst.query, hs);
    if (collected < 64) {
      for (std::size_t r = 0; r < inst.dataset.size(); ++r)
        perm_positions.push_back(static_cast<int>(hs.perm.position_of(r)));
      ++collected;
    }
    return static_cast<int>(tr.positions[0]);
  };
  PartitionProbe probe =
      partition_probe(fn, spec, n_queries, model.cfg.structure_rows(), seed_base);
  probe.data_positions = std::move(perm_positions);
  return probe;
}

FreqMemoryMap freq_memory_map(const FreqRules& rules, std::size_t universe) {
  FreqMemoryMap map;
  std::vector<std::vector<std::int64_t>> users(rules.k);
  double value_sum = 0.0;
  std::size_t value_n = 0;
  for (std::int64_t e = 1; e <= static_cast<std::int64_t>(universe); ++e) {
    FreqMemoryMap::Row row;
    row.element = e;
    rules.update(e, row.positions, row.values);
    for (std::size_t p : row.positions) users[p].push_back(e);
    for (double v : row.values) {
      value_sum += v;
      ++value_n;
    }
    map.rows.push_back(std::move(row));
  }
  for (auto& row : map.rows) {
    row.dedicated = true;
    for (std::size_t p : row.positions) {
      for (std::int64_t other : users[p])
        if (other != row.element) {
          row.dedicated = false;
          break;
        }
      if (!row.dedicated) break;
    }
  }
  map.mean_update_value = value_n ? value_sum / static_cast<double>(value_n) : 0.0;
  return map;
}

}  // namespace dslab

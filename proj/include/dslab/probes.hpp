#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dslab/datagen.hpp"
#include "dslab/freqest.hpp"
#include "dslab/nn_model.hpp"

namespace dslab {

// --- small dense linear algebra used by the probes ---------------------

// least squares via Householder QR; rows >= cols required
std::vector<double> least_squares(const std::vector<std::vector<double>>& x,
                                  const std::vector<double>& y);

// top principal components of row vectors (rows centered first) via
// orthogonal iteration on the covariance; returns components (unit rows)
// and their explained-variance ratios
struct PcaResult {
  std::vector<std::vector<double>> components;
  std::vector<double> explained;  // fraction of total variance per component
};
PcaResult pca_top_components(const std::vector<std::vector<double>>& rows,
                             std::size_t n_components, double tol = 1e-10,
                             std::size_t max_iter = 10000);

// full-batch gradient descent logistic regression (one-vs-rest probe use)
struct LogisticModel {
  std::vector<double> weights;  // d
  double bias = 0.0;
  double predict(const std::vector<double>& x) const;
};
LogisticModel fit_logistic(const std::vector<std::vector<double>>& x,
                           const std::vector<int>& labels, std::size_t iters = 5000,
                           double lr = 0.1, double l2 = 1e-4);

// --- probes -------------------------------------------------------------

struct LookupHistogram {
  std::vector<std::vector<double>> by_bin;  // query-quantile bin -> distribution over positions
  std::vector<double> overall;              // sums to 1 over positions
};

// Distribution of argmax positions of lookup `step_index` over sampled
// instances, optionally conditioned on query-quantile bins (1-D specs).
LookupHistogram lookup_histogram(const NNModel& model, const DistributionSpec& spec,
                                 std::size_t n_instances, std::size_t step_index,
                                 std::uint64_t seed_base, std::size_t query_bins = 1);

// same shape for any trace producer (baselines)
LookupHistogram lookup_histogram_traces(
    const std::function<LookupTrace(const NNInstance&, std::uint64_t)>& fn,
    const DistributionSpec& spec, std::size_t n_instances, std::size_t step_index,
    std::size_t n_positions, std::uint64_t seed_base, std::size_t query_bins = 1);

struct AdjacencyDistanceMatrix {
  std::vector<std::vector<double>> dim1;
  std::vector<std::vector<double>> dim2;
  std::vector<std::vector<double>> combined;  // Euclidean over both dims
};

// Mean pairwise |x_i - x_j| between permuted positions for 2-D specs,
// averaged over instances. Symmetric with a zero diagonal.
AdjacencyDistanceMatrix adjacency_distance_matrix(const NNModel& model,
                                                  const DistributionSpec& spec,
                                                  std::size_t n_instances,
                                                  std::uint64_t seed_base);

// reference matrix: k-d tree in-order traversal ordering instead of the
// learned permutation
AdjacencyDistanceMatrix adjacency_distance_matrix_kdtree(const DistributionSpec& spec,
                                                         std::size_t n_instances,
                                                         std::uint64_t seed_base);

struct TokenRegression {
  std::vector<std::vector<double>> coefficients;  // per token: N sorted-input weights
  std::vector<double> intercepts;
  std::vector<double> r_squared;
};

// OLS of each extra-space token value against the sorted inputs across
// instances (1-D specs, T >= 1). Needs more instances than N+1.
TokenRegression extra_space_regression(const NNModel& model, const DistributionSpec& spec,
                                       std::size_t n_instances, std::uint64_t seed_base);

struct PartitionProbe {
  std::vector<int> observed_positions;              // which positions ever occurred
  std::vector<std::vector<double>> coefficients;    // one-vs-rest classifier weights
  std::vector<int> skipped_positions;               // classes never observed
  PcaResult pca;                                    // on the stacked coefficients
  std::vector<std::vector<double>> query_proj;      // n x 2 projections
  std::vector<int> query_positions;
  std::vector<std::vector<double>> data_proj;       // dataset points, 2-D projections
  std::vector<int> data_positions;                  // permuted position of each point
};

// One-vs-rest logistic classifiers from query vectors to first-lookup
// positions, then PCA on the classifier coefficient matrix (the paper's
// N=8, M=1 reverse-engineering recipe). position_fn maps a query to the
// looked-up position; the model overload uses the first eval-mode lookup.
PartitionProbe partition_probe(const std::function<int(const NNInstance&)>& position_fn,
                               const DistributionSpec& spec, std::size_t n_queries,
                               std::size_t n_positions, std::uint64_t seed_base);
PartitionProbe partition_probe_model(const NNModel& model, const DistributionSpec& spec,
                                     std::size_t n_queries, std::uint64_t seed_base);

struct FreqMemoryMap {
  struct Row {
    std::int64_t element = 0;
    std::vector<std::size_t> positions;
    std::vector<double> values;
    bool dedicated = false;  // no other element updates any of these positions
  };
  std::vector<Row> rows;
  double mean_update_value = 0.0;
};

// eval-mode update position/value table over the whole universe
FreqMemoryMap freq_memory_map(const FreqRules& rules, std::size_t universe);

}  // namespace dslab

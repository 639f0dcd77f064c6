#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dslab/rng.hpp"

namespace dslab {

enum class DistKind {
  Uniform1d,
  Zipf1d,
  Hard1d,
  Uniform2d,
  Hard2d,
  Hypersphere,
  SyntheticRep,
};

enum class Metric { Euclidean, Label };

DistKind dist_kind_from_string(const std::string& s);
std::string to_string(DistKind k);

struct DistributionSpec {
  DistKind kind = DistKind::Uniform1d;
  std::size_t n = 100;          // dataset size
  std::size_t d = 1;            // point dimension
  double alpha = 1.2;           // Zipf skew
  double hard_a = 7.0;          // hard-distribution scale base
  double rho = 0.8;             // hypersphere query inner product
  std::size_t universe = 200;   // Zipf1d value universe
  std::size_t labels = 200;     // SyntheticRep label count
  double rep_sigma = 0.05;      // SyntheticRep per-sample noise

  Metric metric() const {
    return kind == DistKind::SyntheticRep ? Metric::Label : Metric::Euclidean;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static DistributionSpec from_json(const nlohmann::json& j);
};

struct NNInstance {
  std::vector<std::vector<double>> dataset;  // N x d
  std::vector<double> query;                 // d
  std::size_t y_index = 0;
  std::vector<double> y_value;
  // SyntheticRep bookkeeping; never shown to models
  std::vector<std::int64_t> labels;
  std::int64_t query_label = -1;
};

// Exact linear scan under squared Euclidean distance; ties go to the
// smallest index.
std::size_t brute_force_nn(const std::vector<std::vector<double>>& dataset,
                           const std::vector<double>& query);

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

// Zipf over ranks {1..K}: P(rank i) proportional to i^-alpha. With
// permute_ranks the rank->element map is redrawn per instance from the rng.
class ZipfSampler {
 public:
  ZipfSampler(double alpha, std::size_t k, bool permute_ranks, Rng& rng);
  std::int64_t sample(Rng& rng) const;            // element in [1, K]
  double prob_of_rank(std::size_t rank) const;    // 1-indexed
  std::int64_t element_of_rank(std::size_t rank) const;
  std::size_t universe() const { return cum_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<double> cum_;
  std::vector<std::int64_t> rank_to_elem_;
};

// Anti-concentrated multi-scale values: a complete (left-filled) binary tree
// whose level-k node draws Uniform(0, a^(log2 N - k)); children offset the
// parent value down/up. sample_hard_tree keeps heap order (node i's parent is
// (i-1)/2); sample_hard shuffles to a random storage order.
std::vector<double> sample_hard_tree(std::size_t n, double a, Rng& rng);
std::vector<double> sample_hard(std::size_t n, double a, Rng& rng);

// q = uniformly chosen dataset point + N(0, noise_scale^2) per coordinate
std::vector<double> sample_hard_query(const std::vector<std::vector<double>>& dataset, Rng& rng,
                                      double noise_scale = 1.0);

// unit vectors with <q, x> = rho exactly (up to roundoff)
void sample_hypersphere_pair(std::size_t d, double rho, Rng& rng, std::vector<double>& x,
                             std::vector<double>& q);

// deterministic label embedding for the synthetic representation task
std::vector<double> synthetic_rep_embedding(std::int64_t label, std::size_t labels, std::size_t d);

NNInstance sample_nn_instance(const DistributionSpec& spec, std::uint64_t seed);

struct StreamSpec {
  std::size_t universe = 1000;
  double alpha = 1.2;
  std::size_t length = 100;
  bool permute_ranks = true;

  nlohmann::json to_json() const;
  static StreamSpec from_json(const nlohmann::json& j);
};

struct StreamQuery {
  std::size_t t = 0;  // 1-based timestep the query is issued after
  std::int64_t element = 0;
  std::int64_t true_count = 0;
};

struct StreamInstance {
  std::vector<std::int64_t> elements;  // length T, values in [1, K]
  std::vector<StreamQuery> queries;    // one per timestep
};

// Elements i.i.d. from the (possibly rank-permuted) Zipf sampler; the query
// schedule issues one query per timestep from the same permuted distribution
// with exact prefix counts.
StreamInstance gen_stream(const StreamSpec& spec, std::size_t t_len, std::uint64_t seed);

NNInstance sample_synthetic_rep_instance(std::size_t labels, std::size_t d, std::size_t n,
                                         double sigma, Rng& rng);

// line-delimited instance files (one JSON record per line)
void write_instances(const std::string& path, const DistributionSpec& spec,
                     const std::vector<std::uint64_t>& seeds,
                     const std::vector<NNInstance>& instances);
struct InstanceFile {
  DistributionSpec spec;
  std::vector<std::uint64_t> seeds;
  std::vector<NNInstance> instances;
};
InstanceFile load_instances(const std::string& path);

}  // namespace dslab

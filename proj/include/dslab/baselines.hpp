#pragma once

#include <cstdint>
#include <vector>

#include "dslab/lookup.hpp"
#include "dslab/rng.hpp"

namespace dslab {

// Upper-midpoint bisection over an ascending array, one lookup per probed
// index. Once the bracket closes, the still-unprobed bracketing neighbor is
// probed (budget permitting) so the true nearest neighbor is in the trace
// within ceil(log2 N) + 1 lookups.
LookupTrace binary_search_trace(const std::vector<double>& sorted_values, double q,
                                std::size_t budget);

// Interpolated probing: index = clamp(round((q - D[lo]) / (D[hi] - D[lo]) *
// (hi - lo)) + lo). Bracket endpoint values feed the formula; probed indices
// are what the trace charges. Equal endpoints fall back to the midpoint.
LookupTrace interpolation_search_trace(const std::vector<double>& sorted_values, double q,
                                       std::size_t budget);

struct KdNode {
  int axis = 0;
  double split = 0.0;
  int left = -1;
  int right = -1;
  int point = -1;  // leaf payload: index into the original dataset
};

struct KdTree {
  std::vector<KdNode> nodes;
  std::vector<std::vector<double>> points;
  int root = -1;
  std::size_t dims = 0;
};

// Median splits (lower of the two middle values on even counts; ties to the
// left), cycling dimensions from dimension 1 at the root.
KdTree kd_build(const std::vector<std::vector<double>>& points);

// Recursive descent with backtracking pruned by the current best radius.
// One lookup is charged per distance evaluation against a stored point;
// traversal halts once the budget is spent.
LookupTrace kd_query(const KdTree& tree, const std::vector<double>& q, std::size_t budget);

struct LshTable {
  std::vector<std::vector<double>> directions;    // K x d, standard normal
  std::vector<std::vector<std::size_t>> buckets;  // 2^K buckets of size N/2^K
  std::vector<std::vector<double>> points;
  std::size_t capacity = 0;

  std::size_t hash(const std::vector<double>& v) const;
};

// Signed-projection hashing; a full home bucket sends the point to a vacant
// bucket chosen at random. Requires 2^K | N.
LshTable lsh_build(const std::vector<std::vector<double>>& points, std::size_t k,
                   std::uint64_t seed);

// Scans the first `budget` entries of the query's bucket; when the bucket
// holds fewer, the remaining probes are drawn at random from other buckets.
LookupTrace lsh_query(const LshTable& table, const std::vector<double>& q, std::size_t budget,
                      std::uint64_t seed);

struct Bucket1d {
  std::vector<std::size_t> stored;  // per bucket: index of the point closest to the midpoint
  std::vector<std::vector<double>> points;
};

Bucket1d bucket1d_build(const std::vector<std::vector<double>>& points, std::size_t t_buckets);
// maps q to its bucket (clamped into [-1,1]) and returns the stored point
LookupTrace bucket1d_query(const Bucket1d& b, double q);

// w x d grid of real counters with multiply-shift row hashes; estimate is
// the minimum over the d touched counters.
class CountMinSketch {
 public:
  CountMinSketch(std::size_t width, std::size_t depth, double delta, std::uint64_t seed);

  void update(std::int64_t element);
  void update(std::int64_t element, double delta);
  double query(std::int64_t element) const;

  std::size_t width() const { return width_; }
  std::size_t depth() const { return depth_; }
  double delta() const { return delta_; }
  std::size_t bucket(std::size_t row, std::int64_t element) const;
  const std::vector<double>& counters() const { return grid_; }

 private:
  std::size_t width_;
  std::size_t depth_;
  double delta_;
  std::vector<double> grid_;
  std::vector<std::uint64_t> mult_;
  std::vector<std::uint64_t> add_;
};

}  // namespace dslab

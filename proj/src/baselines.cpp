#include "dslab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dslab/datagen.hpp"

namespace dslab {

std::vector<std::vector<double>> best_so_far(const std::vector<std::vector<double>>& values,
                                             const std::vector<double>& query) {
  if (values.empty()) throw Error("best_so_far: empty trace");
  std::vector<std::vector<double>> out(values.size());
  std::size_t best = 0;
  double best_d = squared_distance(values[0], query);
  out[0] = values[0];
  for (std::size_t i = 1; i < values.size(); ++i) {
    double d = squared_distance(values[i], query);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
    out[i] = values[best];
  }
  return out;
}

void finalize_trace(LookupTrace& trace, const std::vector<double>& query) {
  trace.best_so_far = best_so_far(trace.values, query);
  if (trace.prediction.empty()) trace.prediction = trace.best_so_far.back();
}

namespace {

void check_sorted(const std::vector<double>& v, const char* who) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1]) throw Error(std::string(who) + ": input must be ascending");
}

struct Prober {
  const std::vector<double>& d;
  std::size_t budget;
  LookupTrace trace;
  std::vector<bool> seen;

  Prober(const std::vector<double>& values, std::size_t m)
      : d(values), budget(m), seen(values.size(), false) {}

  bool exhausted() const { return trace.positions.size() >= budget; }
  bool probe(std::size_t i) {
    if (exhausted()) return false;
    trace.positions.push_back(i);
    trace.values.push_back({d[i]});
    seen[i] = true;
    return true;
  }
};

}  // namespace

LookupTrace binary_search_trace(const std::vector<double>& sorted_values, double q,
                                std::size_t budget) {
  check_sorted(sorted_values, "binary_search_trace");
  if (sorted_values.empty()) throw Error("binary_search_trace: empty input");
  if (budget == 0) throw Error("binary_search_trace: zero budget");
  Prober p(sorted_values, budget);
  std::ptrdiff_t lo = 0, hi = static_cast<std::ptrdiff_t>(sorted_values.size()) - 1;
  bool exact_hit = false;
  while (lo <= hi && !p.exhausted()) {
    std::ptrdiff_t mid = lo + (hi - lo + 1) / 2;  // upper midpoint: first probe floor(N/2)
    p.probe(static_cast<std::size_t>(mid));
    if (sorted_values[mid] < q) {
      lo = mid + 1;
    } else if (sorted_values[mid] > q) {
      hi = mid - 1;
    } else {
      exact_hit = true;
      break;
    }
  }
  // bracket closed: values[hi] < q < values[lo]; probe the one still unseen
  if (!exact_hit) {
    for (std::ptrdiff_t cand : {hi, lo}) {
      if (cand < 0 || cand >= static_cast<std::ptrdiff_t>(sorted_values.size())) continue;
      if (!p.seen[static_cast<std::size_t>(cand)]) p.probe(static_cast<std::size_t>(cand));
    }
  }
  finalize_trace(p.trace, {q});
  return p.trace;
}

LookupTrace interpolation_search_trace(const std::vector<double>& sorted_values, double q,
                                       std::size_t budget) {
  check_sorted(sorted_values, "interpolation_search_trace");
  if (sorted_values.empty()) throw Error("interpolation_search_trace: empty input");
  if (budget == 0) throw Error("interpolation_search_trace: zero budget");
  Prober p(sorted_values, budget);
  std::ptrdiff_t lo = 0, hi = static_cast<std::ptrdiff_t>(sorted_values.size()) - 1;
  bool exact_hit = false;
  while (lo <= hi && !p.exhausted()) {
    std::ptrdiff_t idx;
    double dlo = sorted_values[lo], dhi = sorted_values[hi];
    if (dhi == dlo) {
      idx = lo + (hi - lo + 1) / 2;  // degenerate bracket: midpoint
    } else {
      double frac = (q - dlo) / (dhi - dlo) * static_cast<double>(hi - lo);
      idx = lo + static_cast<std::ptrdiff_t>(std::llround(frac));
      idx = std::clamp(idx, lo, hi);
    }
    p.probe(static_cast<std::size_t>(idx));
    if (sorted_values[idx] < q) {
      lo = idx + 1;
    } else if (sorted_values[idx] > q) {
      hi = idx - 1;
    } else {
      exact_hit = true;
      break;
    }
  }
  if (!exact_hit) {
    for (std::ptrdiff_t cand : {hi, lo}) {
      if (cand < 0 || cand >= static_cast<std::ptrdiff_t>(sorted_values.size())) continue;
      if (!p.seen[static_cast<std::size_t>(cand)]) p.probe(static_cast<std::size_t>(cand));
    }
  }
  finalize_trace(p.trace, {q});
  return p.trace;
}

namespace {

int kd_build_rec(KdTree& tree, std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                 int depth) {
  if (end - begin == 1) {
    KdNode leaf;
    leaf.point = static_cast<int>(idx[begin]);
    tree.nodes.push_back(leaf);
    return static_cast<int>(tree.nodes.size() - 1);
  }
  int axis = depth % static_cast<int>(tree.dims);
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(begin),
            idx.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
              double va = tree.points[a][axis], vb = tree.points[b][axis];
              return va < vb || (va == vb && a < b);
            });
  std::size_t n = end - begin;
  std::size_t split_pos = begin + (n - 1) / 2;  // lower median joins the left subtree
  KdNode node;
  node.axis = axis;
  node.split = tree.points[idx[split_pos]][axis];
  int self = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  int left = kd_build_rec(tree, idx, begin, split_pos + 1, depth + 1);
  int right = kd_build_rec(tree, idx, split_pos + 1, end, depth + 1);
  tree.nodes[self].left = left;
  tree.nodes[self].right = right;
  return self;
}

}  // namespace

KdTree kd_build(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw Error("kd_build: empty dataset");
  KdTree tree;
  tree.points = points;
  tree.dims = points[0].size();
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  tree.root = kd_build_rec(tree, idx, 0, points.size(), 0);
  return tree;
}

namespace {

struct KdSearch {
  const KdTree& tree;
  const std::vector<double>& q;
  std::size_t budget;
  LookupTrace trace;
  double best_d2 = std::numeric_limits<double>::infinity();

  bool exhausted() const { return trace.positions.size() >= budget; }

  void visit(int node_id) {
    if (node_id < 0 || exhausted()) return;
    const KdNode& node = tree.nodes[node_id];
    if (node.point >= 0) {
      const auto& x = tree.points[static_cast<std::size_t>(node.point)];
      trace.positions.push_back(static_cast<std::size_t>(node.point));
      trace.values.push_back(x);
      best_d2 = std::min(best_d2, squared_distance(x, q));
      return;
    }
    double diff = q[static_cast<std::size_t>(node.axis)] - node.split;
    int near = diff <= 0.0 ? node.left : node.right;
    int far = diff <= 0.0 ? node.right : node.left;
    visit(near);
    if (exhausted()) return;
    if (diff * diff < best_d2) visit(far);
  }
};

}  // namespace

LookupTrace kd_query(const KdTree& tree, const std::vector<double>& q, std::size_t budget) {
  if (budget == 0) throw Error("kd_query: zero budget");
  KdSearch s{tree, q, budget, {}, std::numeric_limits<double>::infinity()};
  s.visit(tree.root);
  finalize_trace(s.trace, q);
  return s.trace;
}

std::size_t LshTable::hash(const std::vector<double>& v) const {
  std::size_t code = 0;
  for (std::size_t k = 0; k < directions.size(); ++k) {
    double proj = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) proj += directions[k][j] * v[j];
    code = (code << 1) | (proj >= 0.0 ? 1u : 0u);
  }
  return code;
}

LshTable lsh_build(const std::vector<std::vector<double>>& points, std::size_t k,
                   std::uint64_t seed) {
  if (points.empty()) throw Error("lsh_build: empty dataset");
  if (k >= 63) throw Error("lsh_build: K too large");
  std::size_t n_buckets = std::size_t{1} << k;
  if (points.size() % n_buckets != 0)
    throw Error("lsh_build: 2^K must divide N (got N=" + std::to_string(points.size()) +
                ", 2^K=" + std::to_string(n_buckets) + "); pick K with 2^K | N");
  LshTable table;
  table.points = points;
  table.capacity = points.size() / n_buckets;
  table.buckets.resize(n_buckets);
  Rng rng(seed);
  table.directions.resize(k);
  for (auto& dir : table.directions) {
    dir.resize(points[0].size());
    for (auto& x : dir) x = rng.normal();
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t code = table.hash(points[i]);
    if (table.buckets[code].size() < table.capacity) {
      table.buckets[code].push_back(i);
      continue;
    }
    // home bucket full: place into a vacant bucket chosen at random
    std::vector<std::size_t> vacant;
    for (std::size_t b = 0; b < n_buckets; ++b)
      if (table.buckets[b].size() < table.capacity) vacant.push_back(b);
    std::size_t pick = vacant[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(vacant.size()) - 1))];
    table.buckets[pick].push_back(i);
  }
  return table;
}

LookupTrace lsh_query(const LshTable& table, const std::vector<double>& q, std::size_t budget,
                      std::uint64_t seed) {
  if (budget == 0) throw Error("lsh_query: zero budget");
  LookupTrace trace;
  std::size_t code = table.hash(q);
  const auto& bucket = table.buckets[code];
  for (std::size_t s = 0; s < bucket.size() && trace.positions.size() < budget; ++s) {
    trace.positions.push_back(bucket[s]);
    trace.values.push_back(table.points[bucket[s]]);
  }
  if (trace.positions.size() < budget) {
    // shortfall: draw the remaining probes at random from other buckets
    Rng rng(seed);
    std::vector<std::size_t> others;
    for (std::size_t b = 0; b < table.buckets.size(); ++b) {
      if (b == code) continue;
      for (std::size_t i : table.buckets[b]) others.push_back(i);
    }
    rng.shuffle(others);
    for (std::size_t i : others) {
      if (trace.positions.size() >= budget) break;
      trace.positions.push_back(i);
      trace.values.push_back(table.points[i]);
    }
  }
  if (trace.positions.empty()) throw Error("lsh_query: nothing retrievable");
  finalize_trace(trace, q);
  return trace;
}

Bucket1d bucket1d_build(const std::vector<std::vector<double>>& points, std::size_t t_buckets) {
  if (points.empty()) throw Error("bucket1d_build: empty dataset");
  if (t_buckets == 0) throw Error("bucket1d_build: T must be positive");
  Bucket1d b;
  b.points = points;
  b.stored.resize(t_buckets);
  for (std::size_t i = 0; i < t_buckets; ++i) {
    double mid = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(t_buckets);
    b.stored[i] = brute_force_nn(points, {mid});
  }
  return b;
}

LookupTrace bucket1d_query(const Bucket1d& b, double q) {
  double clamped = std::clamp(q, -1.0, 1.0);
  std::size_t t = b.stored.size();
  auto bi = static_cast<std::size_t>((clamped + 1.0) / 2.0 * static_cast<double>(t));
  if (bi >= t) bi = t - 1;
  LookupTrace trace;
  trace.positions.push_back(b.stored[bi]);
  trace.values.push_back(b.points[b.stored[bi]]);
  finalize_trace(trace, {q});
  return trace;
}

CountMinSketch::CountMinSketch(std::size_t width, std::size_t depth, double delta,
                               std::uint64_t seed)
    : width_(width), depth_(depth), delta_(delta) {
  if (width_ == 0 || depth_ == 0) throw Error("CountMinSketch: w and d must be positive");
  grid_.assign(width_ * depth_, 0.0);
  Rng rng(seed);
  mult_.resize(depth_);
  add_.resize(depth_);
  for (std::size_t r = 0; r < depth_; ++r) {
    mult_[r] = rng.next_u64() | 1ull;  // odd multiplier
    add_[r] = rng.next_u64();
  }
}

std::size_t CountMinSketch::bucket(std::size_t row, std::int64_t element) const {
  std::uint64_t z = mult_[row] * static_cast<std::uint64_t>(element) + add_[row];
  // multiply-shift range reduction to [0, w)
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(z) * static_cast<unsigned __int128>(width_)) >> 64);
}

void CountMinSketch::update(std::int64_t element) { update(element, delta_); }

void CountMinSketch::update(std::int64_t element, double delta) {
  for (std::size_t r = 0; r < depth_; ++r) grid_[r * width_ + bucket(r, element)] += delta;
}

double CountMinSketch::query(std::int64_t element) const {
  double est = grid_[bucket(0, element)];
  for (std::size_t r = 1; r < depth_; ++r)
    est = std::min(est, grid_[r * width_ + bucket(r, element)]);
  return est;
}

}  // namespace dslab

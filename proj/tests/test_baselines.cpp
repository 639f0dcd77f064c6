#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dslab/baselines.hpp"
#include "dslab/datagen.hpp"

using namespace dslab;

namespace {

std::vector<double> sorted_uniform(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  std::sort(v.begin(), v.end());
  return v;
}

// independent recursive re-derivation of the probe schedule
void reference_bisection(const std::vector<double>& d, double q, std::ptrdiff_t lo,
                         std::ptrdiff_t hi, std::vector<std::size_t>& probes) {
  if (lo > hi) return;
  std::ptrdiff_t mid = (lo + hi + 1) / 2;
  probes.push_back(static_cast<std::size_t>(mid));
  if (d[mid] < q) reference_bisection(d, q, mid + 1, hi, probes);
  else if (d[mid] > q) reference_bisection(d, q, lo, mid - 1, probes);
}

}  // namespace

TEST_CASE("binary_search_trace") {
  Rng rng(100);
  SUBCASE("first probe is floor(N/2) regardless of q") {
    for (std::size_t n : {2ul, 5ul, 16ul, 100ul}) {
      auto d = sorted_uniform(n, rng);
      for (double q : {-2.0, 0.0, 0.3, 2.0}) {
        auto tr = binary_search_trace(d, q, 20);
        CHECK(tr.positions[0] == n / 2);
      }
    }
  }
  SUBCASE("N=100 with budget 7 always finds the exact nearest neighbor") {
    for (int it = 0; it < 500; ++it) {
      auto d = sorted_uniform(100, rng);
      double q = rng.uniform(-1.0, 1.0);
      auto tr = binary_search_trace(d, q, 7);
      std::vector<std::vector<double>> rows;
      for (double v : d) rows.push_back({v});
      CHECK(tr.best_so_far.back()[0] == d[brute_force_nn(rows, {q})]);
    }
  }
  SUBCASE("terminates within ceil(log2 N)+1 lookups") {
    for (std::size_t n : {3ul, 16ul, 31ul, 100ul, 128ul}) {
      std::size_t bound =
          static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n)))) + 1;
      for (int it = 0; it < 200; ++it) {
        auto d = sorted_uniform(n, rng);
        double q = rng.uniform(-1.5, 1.5);
        auto tr = binary_search_trace(d, q, 1000);
        CHECK(tr.lookups() <= bound);
        std::vector<std::vector<double>> rows;
        for (double v : d) rows.push_back({v});
        CHECK(tr.best_so_far.back()[0] == d[brute_force_nn(rows, {q})]);
      }
    }
  }
  SUBCASE("probe schedule matches an independent recursive bisection") {
    for (int it = 0; it < 200; ++it) {
      auto d = sorted_uniform(33, rng);
      double q = rng.uniform(-1.2, 1.2);
      auto tr = binary_search_trace(d, q, 1000);
      std::vector<std::size_t> ref;
      reference_bisection(d, q, 0, 32, ref);
      REQUIRE(tr.positions.size() >= ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(tr.positions[i] == ref[i]);
    }
  }
  SUBCASE("unsorted input rejected") {
    CHECK_THROWS_AS(binary_search_trace({3.0, 1.0}, 0.5, 4), Error);
  }
}

TEST_CASE("interpolation_search_trace") {
  Rng rng(200);
  SUBCASE("q at the left endpoint probes index 0 first") {
    auto d = sorted_uniform(50, rng);
    auto tr = interpolation_search_trace(d, d[0], 10);
    CHECK(tr.positions[0] == 0);
  }
  SUBCASE("midpoint query on an exact grid probes the center first") {
    std::vector<double> d(11);
    for (int i = 0; i <= 10; ++i) d[i] = -1.0 + 0.2 * i;
    auto tr = interpolation_search_trace(d, 0.0, 10);
    CHECK(tr.positions[0] == 5);
  }
  SUBCASE("degenerate equal-value bracket falls back to the midpoint") {
    std::vector<double> d(8, 2.5);
    auto tr = interpolation_search_trace(d, 2.5, 10);
    CHECK(tr.positions[0] == 4);
  }
  SUBCASE("fewer probes to the exact NN than binary search on uniform data") {
    double interp_total = 0.0, binary_total = 0.0;
    int n_inst = 400;
    for (int it = 0; it < n_inst; ++it) {
      auto d = sorted_uniform(100, rng);
      double q = rng.uniform(-1.0, 1.0);
      std::vector<std::vector<double>> rows;
      for (double v : d) rows.push_back({v});
      auto y = d[brute_force_nn(rows, {q})];
      auto count_probes = [&](const LookupTrace& tr) {
        for (std::size_t i = 0; i < tr.values.size(); ++i)
          if (tr.values[i][0] == y) return static_cast<double>(i + 1);
        return static_cast<double>(tr.values.size()) + 1.0;
      };
      interp_total += count_probes(interpolation_search_trace(d, q, 100));
      binary_total += count_probes(binary_search_trace(d, q, 100));
    }
    CHECK(interp_total / n_inst < binary_total / n_inst);
  }
}

TEST_CASE("kd tree") {
  Rng rng(300);
  SUBCASE("singleton tree with one lookup is exact") {
    KdTree t = kd_build({{0.3, -0.2}});
    auto tr = kd_query(t, {1.0, 1.0}, 1);
    CHECK(tr.prediction == std::vector<double>{0.3, -0.2});
  }
  SUBCASE("split axes cycle starting at dimension 1 and medians split values") {
    DistributionSpec s;
    s.kind = DistKind::Uniform2d;
    s.n = 32;
    s.d = 2;
    NNInstance inst = sample_nn_instance(s, 9);
    KdTree t = kd_build(inst.dataset);
    CHECK(t.nodes[static_cast<std::size_t>(t.root)].axis == 0);
    // structural check: left subtree <= split <= right subtree along the axis
    std::function<void(int, int)> walk = [&](int id, int depth) {
      const KdNode& n = t.nodes[static_cast<std::size_t>(id)];
      if (n.point >= 0) return;
      CHECK(n.axis == depth % 2);
      std::function<void(int, bool)> bound = [&](int cid, bool left) {
        const KdNode& c = t.nodes[static_cast<std::size_t>(cid)];
        if (c.point >= 0) {
          double v = t.points[static_cast<std::size_t>(c.point)][static_cast<std::size_t>(n.axis)];
          if (left) CHECK(v <= n.split);
          else CHECK(v >= n.split);
          return;
        }
        bound(c.left, left);
        bound(c.right, left);
      };
      bound(n.left, true);
      bound(n.right, false);
      walk(n.left, depth + 1);
      walk(n.right, depth + 1);
    };
    walk(t.root, 0);
  }
  SUBCASE("unlimited budget agrees with brute force on random 2D instances") {
    DistributionSpec s;
    s.kind = DistKind::Uniform2d;
    s.n = 100;
    s.d = 2;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      NNInstance inst = sample_nn_instance(s, seed);
      KdTree t = kd_build(inst.dataset);
      auto tr = kd_query(t, inst.query, inst.dataset.size());
      CHECK(tr.prediction == inst.y_value);
    }
  }
  SUBCASE("budget caps the number of point visits") {
    DistributionSpec s;
    s.kind = DistKind::Uniform2d;
    s.n = 64;
    s.d = 2;
    NNInstance inst = sample_nn_instance(s, 3);
    KdTree t = kd_build(inst.dataset);
    for (std::size_t budget : {1ul, 2ul, 6ul}) {
      auto tr = kd_query(t, inst.query, budget);
      CHECK(tr.lookups() <= budget);
      CHECK(tr.lookups() >= 1);
    }
  }
}

TEST_CASE("lsh table") {
  Rng rng(400);
  auto make_points = [&](std::size_t n, std::size_t d) {
    std::vector<std::vector<double>> pts(n);
    for (auto& p : pts) {
      p.resize(d);
      for (auto& v : p) v = rng.normal();
    }
    return pts;
  };
  SUBCASE("K=0 keeps everything in one bucket and scans the first M") {
    auto pts = make_points(12, 4);
    LshTable t = lsh_build(pts, 0, 1);
    REQUIRE(t.buckets.size() == 1);
    CHECK(t.buckets[0].size() == 12);
    auto tr = lsh_query(t, pts[0], 3, 2);
    CHECK(tr.positions == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("every bucket holds exactly N/2^K entries and every point appears once") {
    auto pts = make_points(64, 8);
    LshTable t = lsh_build(pts, 3, 7);
    std::multiset<std::size_t> all;
    for (const auto& b : t.buckets) {
      CHECK(b.size() == 8);
      all.insert(b.begin(), b.end());
    }
    CHECK(all.size() == 64);
    std::set<std::size_t> uniq(all.begin(), all.end());
    CHECK(uniq.size() == 64);
  }
  SUBCASE("non-divisible 2^K rejected with guidance") {
    auto pts = make_points(10, 4);
    try {
      lsh_build(pts, 2, 1);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("2^K") != std::string::npos);
    }
  }
  SUBCASE("non-displaced points are found by their own query") {
    auto pts = make_points(64, 8);
    LshTable t = lsh_build(pts, 3, 7);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::size_t home = t.hash(pts[i]);
      bool in_home = std::find(t.buckets[home].begin(), t.buckets[home].end(), i) !=
                     t.buckets[home].end();
      if (!in_home) continue;  // displaced by overflow
      auto tr = lsh_query(t, pts[i], t.capacity, 3);
      CHECK(std::find(tr.positions.begin(), tr.positions.end(), i) != tr.positions.end());
    }
  }
  SUBCASE("shortfall pads from other buckets") {
    auto pts = make_points(16, 4);
    LshTable t = lsh_build(pts, 2, 5);  // capacity 4
    auto tr = lsh_query(t, pts[0], 10, 6);
    CHECK(tr.lookups() == 10);
    std::set<std::size_t> uniq(tr.positions.begin(), tr.positions.end());
    CHECK(uniq.size() == 10);
  }
}

TEST_CASE("bucket1d") {
  std::vector<std::vector<double>> pts = {{-0.9}, {-0.1}, {0.2}, {0.8}};
  SUBCASE("T=1 always returns the point nearest zero") {
    Bucket1d b = bucket1d_build(pts, 1);
    for (double q : {-1.0, -0.4, 0.0, 0.9, 2.0}) {
      auto tr = bucket1d_query(b, q);
      CHECK(tr.prediction == std::vector<double>{-0.1});
    }
  }
  SUBCASE("query equal to a midpoint returns that bucket's stored argmin") {
    Bucket1d b = bucket1d_build(pts, 4);
    // bucket midpoints: -0.75, -0.25, 0.25, 0.75
    CHECK(bucket1d_query(b, -0.75).prediction == std::vector<double>{-0.9});
    CHECK(bucket1d_query(b, 0.25).prediction == std::vector<double>{0.2});
  }
  SUBCASE("out-of-range queries clamp to the nearest bucket") {
    Bucket1d b = bucket1d_build(pts, 4);
    CHECK(bucket1d_query(b, -5.0).prediction == std::vector<double>{-0.9});
    CHECK(bucket1d_query(b, 5.0).prediction == std::vector<double>{0.8});
  }
  SUBCASE("accuracy grows with T on uniform data") {
    DistributionSpec s;
    s.kind = DistKind::Uniform1d;
    s.n = 50;
    s.d = 1;
    auto accuracy = [&](std::size_t t_buckets) {
      int hits = 0;
      const int n_inst = 1500;
      for (int it = 0; it < n_inst; ++it) {
        NNInstance inst = sample_nn_instance(s, 9000 + static_cast<std::uint64_t>(it));
        Bucket1d b = bucket1d_build(inst.dataset, t_buckets);
        auto tr = bucket1d_query(b, inst.query[0]);
        hits += (tr.prediction == inst.y_value) ? 1 : 0;
      }
      return static_cast<double>(hits) / n_inst;
    };
    double a1 = accuracy(1), a8 = accuracy(8), a128 = accuracy(128);
    CHECK(a8 > a1);
    CHECK(a128 > a8);
    CHECK(a128 >= 0.85);
  }
}

TEST_CASE("count-min sketch") {
  SUBCASE("single element streamed c times estimates c * delta") {
    CountMinSketch cms(16, 3, 0.5, 1);
    for (int i = 0; i < 10; ++i) cms.update(42);
    CHECK(cms.query(42) == doctest::Approx(5.0));
  }
  SUBCASE("memory is exactly w*d counters") {
    CountMinSketch cms(32, 4, 1.0, 1);
    CHECK(cms.counters().size() == 128);
  }
  SUBCASE("delta=1 never underestimates") {
    StreamSpec spec;
    spec.universe = 200;
    spec.alpha = 1.2;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      StreamInstance s = gen_stream(spec, 80, seed);
      CountMinSketch cms(16, 2, 1.0, seed);
      std::size_t qi = 0;
      for (std::size_t t = 0; t < s.elements.size(); ++t) {
        cms.update(s.elements[t]);
        CHECK(cms.query(s.queries[qi].element) >=
              static_cast<double>(s.queries[qi].true_count));
        ++qi;
      }
    }
  }
  SUBCASE("delta=0.87 beats delta=1 on the Zipf workload") {
    StreamSpec spec;
    spec.universe = 1000;
    spec.alpha = 1.2;
    double mae_087 = 0.0, mae_1 = 0.0;
    int n_queries = 0;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
      StreamInstance s = gen_stream(spec, 100, seed);
      CountMinSketch a(32, 1, 0.87, seed);
      CountMinSketch b(32, 1, 1.0, seed);
      for (std::size_t t = 0; t < s.elements.size(); ++t) {
        a.update(s.elements[t]);
        b.update(s.elements[t]);
        const auto& q = s.queries[t];
        mae_087 += std::abs(a.query(q.element) - static_cast<double>(q.true_count));
        mae_1 += std::abs(b.query(q.element) - static_cast<double>(q.true_count));
        ++n_queries;
      }
    }
    CHECK(mae_087 / n_queries < mae_1 / n_queries);
  }
}

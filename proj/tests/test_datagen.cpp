#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "dslab/datagen.hpp"
#include "dslab/tensor.hpp"

using namespace dslab;

namespace {

DistributionSpec spec_of(DistKind kind, std::size_t n, std::size_t d) {
  DistributionSpec s;
  s.kind = kind;
  s.n = n;
  s.d = d;
  return s;
}

}  // namespace

TEST_CASE("samplers are pure functions of (spec, seed)") {
  for (auto kind : {DistKind::Uniform1d, DistKind::Zipf1d, DistKind::Hard1d, DistKind::Uniform2d,
                    DistKind::Hard2d, DistKind::Hypersphere, DistKind::SyntheticRep}) {
    DistributionSpec s;
    s.kind = kind;
    s.n = 12;
    s.d = (kind == DistKind::Uniform2d || kind == DistKind::Hard2d) ? 2
          : (kind == DistKind::Hypersphere)                         ? 8
          : (kind == DistKind::SyntheticRep)                        ? 16
                                                                    : 1;
    s.labels = 40;
    NNInstance a = sample_nn_instance(s, 777);
    NNInstance b = sample_nn_instance(s, 777);
    CHECK(a.dataset == b.dataset);
    CHECK(a.query == b.query);
    CHECK(a.y_index == b.y_index);
    NNInstance c = sample_nn_instance(s, 778);
    CHECK(a.dataset != c.dataset);
  }
}

TEST_CASE("emitted instances satisfy the brute-force oracle") {
  for (auto kind :
       {DistKind::Uniform1d, DistKind::Zipf1d, DistKind::Hard1d, DistKind::Uniform2d,
        DistKind::Hard2d, DistKind::Hypersphere}) {
    DistributionSpec s;
    s.kind = kind;
    s.n = 20;
    s.d = (kind == DistKind::Uniform2d || kind == DistKind::Hard2d) ? 2
          : (kind == DistKind::Hypersphere)                         ? 6
                                                                    : 1;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      NNInstance inst = sample_nn_instance(s, seed);
      CHECK(inst.y_index == brute_force_nn(inst.dataset, inst.query));
      CHECK(inst.y_value == inst.dataset[inst.y_index]);
    }
  }
}

TEST_CASE("brute_force_nn") {
  SUBCASE("singleton") {
    CHECK(brute_force_nn({{0.5}}, {100.0}) == 0);
  }
  SUBCASE("duplicate nearest points tie to the smaller index") {
    CHECK(brute_force_nn({{1.0}, {3.0}, {1.0}}, {1.0}) == 0);
    CHECK(brute_force_nn({{0.0}, {2.0}}, {1.0}) == 0);  // equidistant bracket
  }
  SUBCASE("empty dataset rejected") {
    CHECK_THROWS_AS(brute_force_nn({}, {1.0}), Error);
  }
  SUBCASE("query coinciding with a dataset point returns that point") {
    DistributionSpec s = spec_of(DistKind::Uniform1d, 8, 1);
    NNInstance inst = sample_nn_instance(s, 5);
    std::size_t pick = 3;
    CHECK(brute_force_nn(inst.dataset, inst.dataset[pick]) == pick);
  }
}

TEST_CASE("zipf sampler") {
  Rng rng(1);
  SUBCASE("alpha=0 is uniform") {
    ZipfSampler z(0.0, 5, false, rng);
    for (std::size_t r = 1; r <= 5; ++r) CHECK(z.prob_of_rank(r) == doctest::Approx(0.2));
  }
  SUBCASE("alpha=1.2, K=2 normalization") {
    ZipfSampler z(1.2, 2, false, rng);
    CHECK(z.prob_of_rank(1) == doctest::Approx(1.0 / (1.0 + std::pow(2.0, -1.2))));
  }
  SUBCASE("probabilities sum to 1 and are monotone nonincreasing") {
    ZipfSampler z(1.2, 1000, false, rng);
    double sum = 0.0;
    double prev = 2.0;
    for (std::size_t r = 1; r <= 1000; ++r) {
      double p = z.prob_of_rank(r);
      CHECK(p <= prev);
      prev = p;
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  SUBCASE("empirical frequencies track probabilities") {
    ZipfSampler z(1.2, 10, false, rng);
    std::unordered_map<std::int64_t, int> counts;
    const int n = 200000;
    for (int i = 0; i < n; ++i) counts[z.sample(rng)]++;
    for (std::size_t r = 1; r <= 10; ++r)
      CHECK(std::abs(counts[z.element_of_rank(r)] / double(n) - z.prob_of_rank(r)) < 0.01);
  }
  SUBCASE("rank permutation redrawn per sampler") {
    Rng r1(9), r2(9), r3(10);
    ZipfSampler a(1.2, 50, true, r1);
    ZipfSampler b(1.2, 50, true, r2);
    ZipfSampler c(1.2, 50, true, r3);
    CHECK(a.element_of_rank(1) == b.element_of_rank(1));
    bool all_same = true;
    for (std::size_t r = 1; r <= 50; ++r)
      all_same = all_same && (a.element_of_rank(r) == c.element_of_rank(r));
    CHECK_FALSE(all_same);
  }
  SUBCASE("empty universe rejected") {
    CHECK_THROWS_AS(ZipfSampler(1.2, 0, false, rng), Error);
  }
}

TEST_CASE("hard distribution") {
  SUBCASE("N=1 draws from Uniform(0,1)") {
    for (int i = 0; i < 200; ++i) {
      Rng rng(1000 + i);
      auto v = sample_hard(1, 7.0, rng);
      REQUIRE(v.size() == 1);
      CHECK(v[0] >= 0.0);
      CHECK(v[0] <= 1.0);
    }
  }
  SUBCASE("level-k child offsets are bounded by a^(log2 N - k)") {
    for (int trial = 0; trial < 200; ++trial) {
      Rng rng(50 + trial);
      std::size_t n = 15;
      double a = 7.0;
      auto x = sample_hard_tree(n, a, rng);
      double log_n = std::log2(double(n));
      for (std::size_t i = 1; i < n; ++i) {
        double level = std::floor(std::log2(double(i) + 1.0));
        double bound = std::pow(a, log_n - level);
        CHECK(std::abs(x[i] - x[(i - 1) / 2]) <= bound);
      }
    }
  }
  SUBCASE("query: zero-noise degenerate case lands on a dataset point") {
    Rng rng(2);
    auto xs = sample_hard(15, 7.0, rng);
    std::vector<std::vector<double>> d;
    for (double v : xs) d.push_back({v});
    auto q = sample_hard_query(d, rng, 0.0);
    std::size_t yi = brute_force_nn(d, q);
    CHECK(d[yi] == q);
  }
  SUBCASE("query mean tracks the dataset mean") {
    Rng rng(3);
    auto xs = sample_hard(15, 7.0, rng);
    std::vector<std::vector<double>> d;
    double mean = 0.0;
    for (double v : xs) {
      d.push_back({v});
      mean += v / 15.0;
    }
    double qmean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) qmean += sample_hard_query(d, rng)[0] / n;
    // query = uniform dataset point + N(0,1); dataset spread is ~a^log2(15)
    CHECK(std::abs(qmean - mean) < 0.05 * std::pow(7.0, std::log2(15.0)));
  }
}

TEST_CASE("hypersphere pairs") {
  Rng rng(14);
  SUBCASE("norms and inner products are exact") {
    for (int i = 0; i < 200; ++i) {
      std::vector<double> x, q;
      double rho = rng.uniform(0.0, 1.0);
      sample_hypersphere_pair(30, rho, rng, x, q);
      double nx = 0.0, nq = 0.0, dot = 0.0;
      for (std::size_t j = 0; j < 30; ++j) {
        nx += x[j] * x[j];
        nq += q[j] * q[j];
        dot += x[j] * q[j];
      }
      CHECK(std::abs(nx - 1.0) <= 1e-12);
      CHECK(std::abs(nq - 1.0) <= 1e-12);
      CHECK(std::abs(dot - rho) <= 1e-12);
    }
  }
  SUBCASE("rho=1 copies the point; rho=0 is orthogonal") {
    std::vector<double> x, q;
    sample_hypersphere_pair(5, 1.0, rng, x, q);
    CHECK(x == q);
    sample_hypersphere_pair(5, 0.0, rng, x, q);
    double dot = 0.0;
    for (std::size_t j = 0; j < 5; ++j) dot += x[j] * q[j];
    CHECK(std::abs(dot) <= 1e-12);
  }
  SUBCASE("d<2 with rho<1 rejected") {
    std::vector<double> x, q;
    CHECK_THROWS_AS(sample_hypersphere_pair(1, 0.5, rng, x, q), Error);
  }
  SUBCASE("instance construction hits the target inner product") {
    DistributionSpec s;
    s.kind = DistKind::Hypersphere;
    s.n = 10;
    s.d = 30;
    s.rho = 0.8;
    NNInstance inst = sample_nn_instance(s, 21);
    double best = -2.0;
    for (const auto& row : inst.dataset) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 30; ++j) dot += row[j] * inst.query[j];
      best = std::max(best, dot);
    }
    CHECK(std::abs(best - 0.8) <= 1e-9);
  }
}

TEST_CASE("streams") {
  StreamSpec spec;
  spec.universe = 50;
  spec.alpha = 1.2;
  spec.permute_ranks = true;
  SUBCASE("T=1: the first element has count 1") {
    StreamInstance s = gen_stream(spec, 1, 42);
    REQUIRE(s.elements.size() == 1);
    REQUIRE(s.queries.size() == 1);
    if (s.queries[0].element == s.elements[0]) CHECK(s.queries[0].true_count == 1);
  }
  SUBCASE("prefix counts match a hash-table recount oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      StreamInstance s = gen_stream(spec, 60, seed);
      for (const auto& q : s.queries) {
        std::int64_t count = 0;
        for (std::size_t t = 0; t < q.t; ++t)
          if (s.elements[t] == q.element) ++count;
        CHECK(count == q.true_count);
      }
    }
  }
  SUBCASE("deterministic under seed") {
    StreamInstance a = gen_stream(spec, 40, 7);
    StreamInstance b = gen_stream(spec, 40, 7);
    CHECK(a.elements == b.elements);
  }
  SUBCASE("zero-length rejected") { CHECK_THROWS_AS(gen_stream(spec, 0, 1), Error); }
}

TEST_CASE("synthetic representation task") {
  SUBCASE("sigma=0 makes the same-label pair identical") {
    Rng rng(4);
    NNInstance inst = sample_synthetic_rep_instance(40, 16, 10, 0.0, rng);
    CHECK(inst.query == inst.dataset[inst.y_index]);
    CHECK(inst.labels[inst.y_index] == inst.query_label);
  }
  SUBCASE("exactly one dataset point shares the query label") {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
      NNInstance inst = sample_synthetic_rep_instance(40, 16, 20, 0.05, rng);
      int shared = 0;
      for (auto l : inst.labels) shared += (l == inst.query_label) ? 1 : 0;
      CHECK(shared == 1);
    }
  }
  SUBCASE("N > L rejected") {
    Rng rng(6);
    CHECK_THROWS_AS(sample_synthetic_rep_instance(10, 16, 11, 0.05, rng), Error);
  }
  SUBCASE("same-label pairs are nearer than different-label pairs at sigma=0.05") {
    Rng rng(7);
    const std::size_t L = 200, d = 16;
    const double sigma = 0.05;
    int wins = 0;
    const int trials = 4000;
    for (int i = 0; i < trials; ++i) {
      std::int64_t l1 = rng.uniform_int(0, L - 1);
      std::int64_t l2 = l1;
      while (l2 == l1) l2 = rng.uniform_int(0, L - 1);
      auto noisy = [&](std::int64_t l) {
        auto e = synthetic_rep_embedding(l, L, d);
        for (auto& v : e) v += sigma * rng.normal();
        return e;
      };
      auto a = noisy(l1), b = noisy(l1), c = noisy(l2);
      if (squared_distance(a, b) < squared_distance(a, c)) ++wins;
    }
    CHECK(wins >= static_cast<int>(0.99 * trials));
  }
}

TEST_CASE("instance files round-trip and re-verify") {
  DistributionSpec s = spec_of(DistKind::Uniform1d, 6, 1);
  std::vector<NNInstance> insts;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 5; ++k) {
    seeds.push_back(k);
    insts.push_back(sample_nn_instance(s, k));
  }
  auto path = (std::filesystem::temp_directory_path() / "dslab_instances.jsonl").string();
  write_instances(path, s, seeds, insts);
  InstanceFile f = load_instances(path);
  REQUIRE(f.instances.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(f.instances[i].dataset == insts[i].dataset);
    CHECK(f.instances[i].y_index == insts[i].y_index);
  }
  // idempotent: rewriting gives identical bytes
  auto path2 = path + ".2";
  write_instances(path2, f.spec, f.seeds, f.instances);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

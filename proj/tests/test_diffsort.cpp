#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "dslab/diffsort.hpp"
#include "test_util.hpp"

using namespace dslab;
using namespace dslab::testing;
namespace op = dslab::ops;

namespace {

// rank vectors with every pairwise gap at least `gap`, in shuffled order
std::vector<double> ranks_with_gap(std::size_t n, double gap, Rng& rng) {
  std::vector<double> v(n);
  double acc = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    acc += gap + rng.uniform(0.0, 1.0);
    v[i] = acc;
  }
  rng.shuffle(v);
  return v;
}

std::vector<std::size_t> argmax_rows(const Tensor& m) {
  std::vector<std::size_t> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.cols(); ++c)
      if (m.at(r, c) > m.at(r, best)) best = c;
    out[r] = best;
  }
  return out;
}

}  // namespace

TEST_CASE("soft_sort basics") {
  SUBCASE("singleton") {
    auto p = soft_sort(nullptr, Tensor::col({3.7}), 1.0);
    CHECK(p.matrix.rows() == 1);
    CHECK(p.matrix.values()[0] == doctest::Approx(1.0));
  }
  SUBCASE("tau must be positive") {
    CHECK_THROWS_AS(soft_sort(nullptr, Tensor::col({1.0, 2.0}), 0.0), Error);
  }
  SUBCASE("low-temperature rows select the argsort order") {
    auto p = soft_sort(nullptr, Tensor::col({2.0, 0.0, 1.0}), 1e-3);
    CHECK(argmax_rows(p.matrix) == std::vector<std::size_t>{1, 2, 0});
  }
  SUBCASE("rows sum to one on 1000 random rank vectors") {
    Rng rng(5150);
    for (int it = 0; it < 1000; ++it) {
      std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 24));
      Tensor ranks = random_tensor({n, 1}, rng, -5.0, 5.0);
      auto p = soft_sort(nullptr, ranks, rng.uniform(0.05, 3.0));
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          CHECK(p.matrix.at(r, c) >= 0.0);
          s += p.matrix.at(r, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("hard_sort agrees with a comparison-sort oracle") {
  SUBCASE("examples") {
    CHECK(hard_sort(std::vector<double>{3, 1, 2}).perm == std::vector<std::size_t>{1, 2, 0});
    CHECK(hard_sort(std::vector<double>{1, 1}).perm == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("10^4 random vectors") {
    Rng rng(77);
    for (int it = 0; it < 10000; ++it) {
      std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 12));
      std::vector<double> v(n);
      // coarse grid so ties actually occur
      for (auto& x : v) x = static_cast<double>(rng.uniform_int(-4, 4));
      auto p = hard_sort(v);
      // oracle: pair each value with its index and std::sort
      std::vector<std::pair<double, std::size_t>> pairs(n);
      for (std::size_t i = 0; i < n; ++i) pairs[i] = {v[i], i};
      std::sort(pairs.begin(), pairs.end());
      for (std::size_t i = 0; i < n; ++i) CHECK(p.perm[i] == pairs[i].second);
    }
  }
}

TEST_CASE("limit consistency: soft_sort at tau=1e-3 hard-rounds to hard_sort") {
  Rng rng(4242);
  for (int it = 0; it < 1000; ++it) {
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 20));
    auto v = ranks_with_gap(n, 1e-2, rng);
    auto soft = soft_sort(nullptr, Tensor::col(v), 1e-3);
    auto hard = hard_sort(v);
    CHECK(argmax_rows(soft.matrix) == hard.perm);
  }
}

TEST_CASE("apply_permutation") {
  Tensor d = Tensor::from_values({3, 2}, {10, 11, 20, 21, 30, 31});
  SUBCASE("identity") {
    SoftPermutation p = hard_sort(std::vector<double>{0.0, 1.0, 2.0});
    Tensor out = apply_permutation(nullptr, p, d);
    CHECK(out.values() == d.values());
  }
  SUBCASE("hard permutation from ranks [3,1,2] maps rows (a,b,c) to (b,c,a)") {
    SoftPermutation p = hard_sort(std::vector<double>{3.0, 1.0, 2.0});
    Tensor out = apply_permutation(nullptr, p, d);
    CHECK(out.values() == std::vector<double>{20, 21, 30, 31, 10, 11});
  }
  SUBCASE("soft rows stay in the convex hull of the inputs") {
    Rng rng(8);
    for (int it = 0; it < 200; ++it) {
      std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 10));
      Tensor ranks = random_tensor({n, 1}, rng);
      Tensor data = random_tensor({n, 2}, rng);
      auto p = soft_sort(nullptr, ranks, rng.uniform(0.2, 2.0));
      Tensor out = apply_permutation(nullptr, p, data);
      for (std::size_t c = 0; c < 2; ++c) {
        double lo = data.at(0, c), hi = data.at(0, c);
        for (std::size_t r = 1; r < n; ++r) {
          lo = std::min(lo, data.at(r, c));
          hi = std::max(hi, data.at(r, c));
        }
        for (std::size_t r = 0; r < n; ++r) {
          CHECK(out.at(r, c) >= lo - 1e-12);
          CHECK(out.at(r, c) <= hi + 1e-12);
        }
      }
    }
  }
  SUBCASE("dimension mismatch rejected") {
    SoftPermutation p = hard_sort(std::vector<double>{1.0, 2.0});
    CHECK_THROWS_AS(apply_permutation(nullptr, p, d), Error);
  }
}

TEST_CASE("gradient of apply_permutation(soft_sort(.)) matches finite differences") {
  Rng rng(99);
  for (int it = 0; it < 20; ++it) {
    std::size_t n = 5;
    Tensor ranks = Tensor::col(ranks_with_gap(n, 0.05, rng)).set_requires_grad(true);
    Tensor data = random_tensor({n, 2}, rng);
    Tensor w = random_tensor({n, 2}, rng);
    auto fn = [&](Tape* t, const std::vector<Tensor>& xs) {
      auto p = soft_sort(t, xs[0], 0.7);
      Tensor out = apply_permutation(t, p, data);
      return op::sum_all(t, op::mul(t, out, w));
    };
    FdReport rep = check_gradients(fn, {ranks});
    CHECK_MESSAGE(rep.max_rel <= 1e-4, "iteration ", it, " max rel err ", rep.max_rel);
  }
}

TEST_CASE("sortedness") {
  SUBCASE("sorted data under the identity permutation scores 1") {
    std::vector<double> d{-2.0, -1.0, 0.5, 3.0};
    SoftPermutation p = hard_sort(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(sortedness(p, d) == doctest::Approx(1.0));
  }
  SUBCASE("two reversed elements score 0") {
    std::vector<double> d{1.0, 0.0};
    SoftPermutation p = hard_sort(std::vector<double>{0.0, 1.0});
    CHECK(sortedness(p, d) == doctest::Approx(0.0));
  }
  SUBCASE("re-sorting already-sorted data is the identity") {
    Rng rng(3);
    std::vector<double> d(8);
    for (auto& v : d) v = rng.uniform(-1.0, 1.0);
    auto p1 = hard_sort(d);
    std::vector<double> sorted(8);
    for (std::size_t i = 0; i < 8; ++i) sorted[i] = d[p1.perm[i]];
    auto p2 = hard_sort(sorted);
    std::vector<std::size_t> identity(8);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    CHECK(p2.perm == identity);
    CHECK(sortedness(p2, sorted) == doctest::Approx(1.0));
  }
  SUBCASE("soft input rejected") {
    auto p = soft_sort(nullptr, Tensor::col({1.0, 2.0}), 1.0);
    CHECK_THROWS_AS(sortedness(p, std::vector<double>{1.0, 2.0}), Error);
  }
}

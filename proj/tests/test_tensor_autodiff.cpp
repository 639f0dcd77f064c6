#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dslab/adam.hpp"
#include "dslab/checkpoint.hpp"
#include "dslab/ops.hpp"
#include "test_util.hpp"

using namespace dslab;
using namespace dslab::testing;
namespace op = dslab::ops;

namespace {

// scalarize an arbitrary output through fixed random weights so every output
// element contributes to the checked gradient
Tensor weighted_loss(Tape* t, const Tensor& y, const Tensor& w) {
  return op::sum_all(t, op::mul(t, y, w));
}

struct OpCase {
  op::OpKind kind;
  std::vector<Tensor> inputs;
  op::OpAttrs attrs;
};

std::vector<OpCase> make_op_cases(Rng& rng) {
  std::vector<OpCase> cases;
  auto rt = [&](Shape s) { return random_tensor(std::move(s), rng).set_requires_grad(true); };
  auto rtnz = [&](Shape s) {
    return random_tensor_away_from_zero(std::move(s), rng).set_requires_grad(true);
  };
  cases.push_back({op::OpKind::MatMul, {rt({3, 4}), rt({4, 2})}, {}});
  cases.push_back({op::OpKind::Transpose, {rt({3, 4})}, {}});
  // all four broadcast layouts for the elementwise binaries
  for (auto kind : {op::OpKind::Add, op::OpKind::Sub, op::OpKind::Mul}) {
    cases.push_back({kind, {rt({3, 4}), rt({3, 4})}, {}});
    cases.push_back({kind, {rt({3, 4}), rt({1, 1})}, {}});
    cases.push_back({kind, {rt({3, 4}), rt({1, 4})}, {}});
    cases.push_back({kind, {rt({3, 4}), rt({3, 1})}, {}});
  }
  for (Shape bs : {Shape{3, 4}, Shape{1, 1}, Shape{1, 4}, Shape{3, 1}}) {
    Tensor denom = random_tensor_away_from_zero(bs, rng, 0.5).set_requires_grad(true);
    cases.push_back({op::OpKind::Div, {rt({3, 4}), denom}, {}});
  }
  cases.push_back({op::OpKind::Neg, {rt({3, 4})}, {}});
  cases.push_back({op::OpKind::Abs, {rtnz({3, 4})}, {}});
  cases.push_back({op::OpKind::Relu, {rtnz({3, 4})}, {}});
  cases.push_back({op::OpKind::Exp, {rt({3, 4})}, {}});
  cases.push_back({op::OpKind::Log, {random_tensor({3, 4}, rng, 0.1, 5.0).set_requires_grad(true)}, {}});
  {
    op::OpAttrs a;
    a.scale = 1.7;
    cases.push_back({op::OpKind::Scale, {rt({3, 4})}, a});
  }
  cases.push_back({op::OpKind::SoftmaxRows, {rt({3, 5})}, {}});
  cases.push_back({op::OpKind::LayerNorm, {rt({3, 6}), rt({1, 6}), rt({1, 6})}, {}});
  cases.push_back({op::OpKind::ConcatRows, {rt({2, 4}), rt({3, 4})}, {}});
  cases.push_back({op::OpKind::ConcatCols, {rt({3, 2}), rt({3, 3})}, {}});
  {
    op::OpAttrs a;
    a.i0 = 1;
    a.i1 = 3;
    cases.push_back({op::OpKind::SliceRows, {rt({4, 5})}, a});
    cases.push_back({op::OpKind::SliceCols, {rt({4, 5})}, a});
  }
  cases.push_back({op::OpKind::SumAll, {rt({3, 4})}, {}});
  cases.push_back({op::OpKind::MeanAll, {rt({3, 4})}, {}});
  cases.push_back({op::OpKind::SumRows, {rt({3, 4})}, {}});
  cases.push_back({op::OpKind::SumCols, {rt({3, 4})}, {}});
  {
    op::OpAttrs a;
    a.target = 2;
    cases.push_back({op::OpKind::CrossEntropyLogits, {rt({1, 6})}, a});
  }
  return cases;
}

}  // namespace

TEST_CASE("every primitive matches central finite differences") {
  Rng rng(20240707);
  auto cases = make_op_cases(rng);
  // every OpKind must appear at least once
  for (auto kind : op::all_op_kinds()) {
    bool found = false;
    for (const auto& c : cases) found = found || c.kind == kind;
    CHECK_MESSAGE(found, "missing FD coverage for ", op::op_name(kind));
  }
  for (const auto& c : cases) {
    Tensor probe = op::forward(nullptr, c.kind, c.inputs, c.attrs);
    Tensor w = random_tensor({probe.rows(), probe.cols()}, rng);
    auto fn = [&](Tape* t, const std::vector<Tensor>& xs) {
      return weighted_loss(t, op::forward(t, c.kind, xs, c.attrs), w);
    };
    FdReport rep = check_gradients(fn, c.inputs);
    CHECK_MESSAGE(rep.max_rel <= 1e-4, op::op_name(c.kind), " max rel err ", rep.max_rel);
    CHECK(rep.checked > 0);
  }
}

TEST_CASE("100 random 3-layer graphs match finite differences") {
  for (int g = 0; g < 100; ++g) {
    Rng rng(900 + g);
    Tensor x = random_tensor_away_from_zero({3, 3}, rng).set_requires_grad(true);
    Tensor w1 = random_tensor({3, 3}, rng).set_requires_grad(true);
    Tensor w2 = random_tensor({3, 3}, rng).set_requires_grad(true);
    Tensor gamma = random_tensor({1, 3}, rng).set_requires_grad(true);
    Tensor beta = random_tensor({1, 3}, rng).set_requires_grad(true);
    Tensor wloss = random_tensor({3, 3}, rng);
    int pick1 = static_cast<int>(rng.uniform_int(0, 2));
    int pick2 = static_cast<int>(rng.uniform_int(0, 2));
    auto fn = [&](Tape* t, const std::vector<Tensor>& xs) {
      Tensor h = op::matmul(t, xs[0], xs[1]);
      switch (pick1) {
        case 0: h = op::relu(t, h); break;
        case 1: h = op::softmax_rows(t, h); break;
        default: h = op::layer_norm(t, h, xs[3], xs[4]); break;
      }
      h = op::matmul(t, h, xs[2]);
      switch (pick2) {
        case 0: h = op::abs(t, h); break;
        case 1: h = op::exp(t, op::scale(t, h, 0.3)); break;
        default: h = op::softmax_rows(t, h); break;
      }
      return weighted_loss(t, h, wloss);
    };
    FdReport rep = check_gradients(fn, {x, w1, w2, gamma, beta});
    CHECK_MESSAGE(rep.max_rel <= 1e-4, "graph ", g, " max rel err ", rep.max_rel);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("d(x^2)/dx at 3 is 6") {
    Tensor x = Tensor::scalar(3.0).set_requires_grad(true);
    Tape tape;
    Tensor loss = op::sum_all(&tape, op::mul(&tape, x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("d mse(1, 0) / dyhat is 2") {
    Tensor yhat = Tensor::scalar(1.0).set_requires_grad(true);
    Tensor y = Tensor::scalar(0.0);
    Tape tape;
    Tensor loss = op::mse(&tape, yhat, y);
    tape.backward(loss);
    CHECK(yhat.grad()[0] == doctest::Approx(2.0));
  }
  SUBCASE("non-scalar loss rejected") {
    Tensor x = Tensor::row({1.0, 2.0}).set_requires_grad(true);
    Tape tape;
    Tensor y = op::relu(&tape, x);
    CHECK_THROWS_AS(tape.backward(y), Error);
  }
  SUBCASE("loss not on tape rejected") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), Error);
  }
  SUBCASE("tensor not reaching loss gets zero gradient") {
    Tensor x = Tensor::scalar(2.0).set_requires_grad(true);
    Tensor z = Tensor::scalar(5.0).set_requires_grad(true);
    Tape tape;
    Tensor loss = op::sum_all(&tape, op::mul(&tape, x, x));
    op::mul(&tape, z, z);  // recorded but disconnected from the loss
    tape.backward(loss);
    REQUIRE(z.grad().size() == 1);
    CHECK(z.grad()[0] == 0.0);
  }
  SUBCASE("two backward passes agree bit for bit") {
    Rng rng(7);
    Tensor x = random_tensor({3, 3}, rng).set_requires_grad(true);
    Tensor w = random_tensor({3, 3}, rng).set_requires_grad(true);
    Tape tape;
    Tensor loss = op::mean_all(&tape, op::softmax_rows(&tape, op::matmul(&tape, x, w)));
    tape.backward(loss);
    std::vector<double> g1 = x.grad(), gw1 = w.grad();
    tape.backward(loss);
    CHECK(x.grad() == g1);
    CHECK(w.grad() == gw1);
  }
}

TEST_CASE("forward contracts") {
  SUBCASE("matmul identity") {
    Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    Tensor v = Tensor::from_values({2, 1}, {3, 4});
    Tensor out = op::matmul(nullptr, eye, v);
    CHECK(out.values() == std::vector<double>{3, 4});
  }
  SUBCASE("softmax symmetry and row sums") {
    Tensor out = op::softmax_rows(nullptr, Tensor::row({0.0, 0.0}));
    CHECK(out.values()[0] == doctest::Approx(0.5));
    CHECK(out.values()[1] == doctest::Approx(0.5));
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      Tensor x = random_tensor({4, 7}, rng, -30.0, 30.0);
      Tensor y = op::softmax_rows(nullptr, x);
      for (std::size_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
          CHECK(y.at(r, c) >= 0.0);
          s += y.at(r, c);
        }
        CHECK(std::abs(s - 1.0) <= 1e-9);
      }
    }
  }
  SUBCASE("layer norm of a constant row is zero pre-affine") {
    Tensor x = Tensor::row({4.2, 4.2, 4.2});
    Tensor gamma = Tensor::row({1.0, 1.0, 1.0});
    Tensor beta = Tensor::row({0.0, 0.0, 0.0});
    Tensor y = op::layer_norm(nullptr, x, gamma, beta);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("shape mismatch names the op and both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
      op::matmul(nullptr, a, b);
      FAIL("expected throw");
    } catch (const Error& e) {
      std::string msg = e.what();
      CHECK(msg.find("matmul") != std::string::npos);
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[4x5]") != std::string::npos);
    }
  }
  SUBCASE("non-finite input rejected") {
    Tensor a = Tensor::row({1.0, std::nan("")});
    CHECK_THROWS_AS(op::relu(nullptr, a), Error);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient and zero weight decay is a fixed point") {
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::row({1.0, -2.0, 3.0}));
    AdamState st;
    st.weight_decay = 0.0;
    GradMap g{{"p", {0.0, 0.0, 0.0}}};
    std::vector<double> before = p.values();
    for (int i = 0; i < 5; ++i) adam_step(ps, g, st);
    CHECK(p.values() == before);
    CHECK(st.step == 5);
  }
  SUBCASE("first step moves by about -lr * sign(g)") {
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::scalar(0.7));
    AdamState st;
    st.lr = 0.01;
    GradMap g{{"p", {0.42}}};
    adam_step(ps, g, st);
    double delta = p.values()[0] - 0.7;
    CHECK(delta == doctest::Approx(-st.lr * 0.42 / (0.42 + st.eps)).epsilon(1e-12));
  }
  SUBCASE("10-step trace matches a scalar reference implementation") {
    // quadratic bowl f(p) = (p - 3)^2, gradient 2(p - 3)
    double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 1e-3;
    double ref = -1.0, m = 0.0, v = 0.0;
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::scalar(-1.0));
    AdamState st;
    st.lr = lr;
    st.weight_decay = wd;
    for (int t = 1; t <= 10; ++t) {
      double g = 2.0 * (ref - 3.0);
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      double mhat = m / (1 - std::pow(b1, t));
      double vhat = v / (1 - std::pow(b2, t));
      ref -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * ref);

      GradMap gm{{"p", {2.0 * (p.values()[0] - 3.0)}}};
      adam_step(ps, gm, st);
      CHECK(std::abs(p.values()[0] - ref) <= 1e-10);
    }
  }
  SUBCASE("non-finite gradient skips the parameter and counts the event") {
    ParamStore ps;
    Tensor p = ps.add("p", Tensor::scalar(1.0));
    Tensor q = ps.add("q", Tensor::scalar(2.0));
    AdamState st;
    GradMap g{{"p", {std::nan("")}}, {"q", {1.0}}};
    adam_step(ps, g, st);
    CHECK(p.values()[0] == 1.0);
    CHECK(q.values()[0] != 2.0);
    CHECK(st.skipped_nonfinite == 1);
    CHECK(st.step == 1);
  }
}

TEST_CASE("gumbel sampling") {
  SUBCASE("same seed gives identical tensors") {
    Tensor a = sample_gumbel({4, 4}, 99, 2.0);
    Tensor b = sample_gumbel({4, 4}, 99, 2.0);
    CHECK(a.values() == b.values());
  }
  SUBCASE("temperature must be positive") {
    CHECK_THROWS_AS(sample_gumbel({2, 2}, 1, 0.0), Error);
    CHECK_THROWS_AS(op::noisy_softmax(nullptr, Tensor::row({0, 0}), Tensor::row({0, 0}), -1.0),
                    Error);
  }
  SUBCASE("sample mean approaches the Euler-Mascheroni constant") {
    Rng rng(123);
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += rng.gumbel();
    CHECK(std::abs(sum / n - 0.5772156649) <= 0.01);
  }
  SUBCASE("noisy softmax at temperature 2 matches the definition") {
    Tensor logits = Tensor::row({0.3, -1.0, 2.0});
    Tensor noise = sample_gumbel({1, 3}, 5, 2.0);
    Tensor got = op::noisy_softmax(nullptr, logits, noise, 2.0);
    double mx = -1e300;
    std::vector<double> z(3);
    for (int i = 0; i < 3; ++i) {
      z[i] = (logits.values()[i] + noise.values()[i]) / 2.0;
      mx = std::max(mx, z[i]);
    }
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += std::exp(z[i] - mx);
    for (int i = 0; i < 3; ++i) CHECK(got.values()[i] == doctest::Approx(std::exp(z[i] - mx) / s));
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(31337);
  ParamStore ps;
  ps.add("enc.w", random_tensor({5, 3}, rng));
  ps.add("enc.b", random_tensor({1, 3}, rng));
  ps.add("head", random_tensor({3, 1}, rng));
  AdamState st;
  st.lr = 3e-4;
  st.weight_decay = 1e-3;
  st.step = 17;
  for (const auto& name : ps.names()) {
    auto& m = st.m[name];
    auto& v = st.v[name];
    for (std::size_t i = 0; i < ps.at(name).size(); ++i) {
      m.push_back(rng.normal());
      v.push_back(std::abs(rng.normal()));
    }
  }
  Json manifest = {{"seed", 42}, {"config_hash", config_hash({{"a", 1}})}};
  std::string path = (std::filesystem::temp_directory_path() / "dslab_ck_test.bin").string();
  save_checkpoint(path, ps, st, manifest);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.params.names() == ps.names());
  for (const auto& name : ps.names()) {
    CHECK(ck.params.at(name).shape() == ps.at(name).shape());
    CHECK(ck.params.at(name).values() == ps.at(name).values());
    CHECK(ck.adam.m[name] == st.m[name]);
    CHECK(ck.adam.v[name] == st.v[name]);
  }
  CHECK(ck.adam.step == 17);
  CHECK(ck.manifest["seed"] == 42);
  // saving the loaded state reproduces the same bytes
  std::string path2 = path + ".2";
  save_checkpoint(path2, ck.params, ck.adam, ck.manifest);
  CHECK(file_fingerprint(path) == file_fingerprint(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("config hash is stable and key-order independent") {
  Json a = {{"x", 1}, {"y", {{"z", 2.5}}}};
  Json b;
  b["y"]["z"] = 2.5;
  b["x"] = 1;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash({{"x", 2}}));
}

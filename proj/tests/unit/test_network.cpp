#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "hml/network.hpp"
#include "unit/gradcheck.hpp"
#include "unit/support.hpp"

using hml::Architecture;
using hml::ErrorKind;
using hml::ParamVector;
using hml::Vector;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const hml::Error& e) {
    return e.kind();
  }
  FAIL("expected an hml::Error");
  return ErrorKind::Usage;
}

// Straightforward matrix arithmetic over the structured view.
Vector oracle_forward(const hml::StructuredParams& sp, Vector x) {
  for (std::size_t l = 0; l < sp.weights.size(); ++l) {
    Vector y(sp.weights[l].size());
    for (std::size_t o = 0; o < y.size(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += sp.weights[l][o][i] * x[i];
      y[o] = acc + sp.biases[l][o];
      if (l + 1 < sp.weights.size()) y[o] = std::tanh(y[o]);
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("parameter count") {
  CHECK(Architecture{{16, 32, 10}}.num_params() == 874);
  CHECK(hml::init_params(Architecture{{16, 32, 10}}, 1).size() == 874);
  CHECK(Architecture{{4, 3}}.num_params() == 15);
}

TEST_CASE("init is deterministic and seed-dependent") {
  Architecture arch{{16, 32, 10}};
  auto a = hml::init_params(arch, 5);
  auto b = hml::init_params(arch, 5);
  auto c = hml::init_params(arch, 6);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  for (const auto& s : a.shapes) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
    for (std::size_t k = 0; k < s.in * s.out; ++k) CHECK(std::abs(a.values[s.weight_offset() + k]) <= bound);
    for (std::size_t k = 0; k < s.out; ++k) CHECK(a.values[s.bias_offset() + k] == 0.0);
  }
}

TEST_CASE("zero-sized layer is rejected") {
  CHECK(kind_of([] { hml::init_params(Architecture{{16, 0, 10}}, 1); }) == ErrorKind::Config);
  CHECK(kind_of([] { hml::init_params(Architecture{{16}}, 1); }) == ErrorKind::Config);
}

TEST_CASE("structured round-trip is exact") {
  Architecture arch{{5, 7, 3, 4}};
  auto p = hml::init_params(arch, 9);
  std::mt19937_64 rng(1);
  for (double& v : p.values) v = testing::random_vector(rng, 1)[0];
  auto back = hml::from_structured(arch, hml::to_structured(p), p.seed);
  CHECK(back.values == p.values);
  CHECK(back.seed == p.seed);
}

TEST_CASE("forward examples") {
  Architecture arch{{3, 4, 2}};
  auto zero = ParamVector::zeros(arch);
  auto rec = hml::forward(zero, Vector{1, 2, 3});
  CHECK(rec.logits() == Vector{0, 0});

  // Single linear layer with identity weights.
  Architecture lin{{3, 3}};
  hml::StructuredParams sp;
  sp.weights = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  sp.biases = {{0, 0, 0}};
  auto id = hml::from_structured(lin, sp);
  CHECK(hml::forward(id, Vector{0.5, -2, 7}).logits() == Vector{0.5, -2, 7});

  CHECK(kind_of([&] { hml::forward(zero, Vector{1, 2}); }) == ErrorKind::Shape);
}

TEST_CASE("forward matches a matrix-arithmetic oracle") {
  std::mt19937_64 rng(4);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{3, 2}, {4, 6, 3}, {16, 32, 16}, {5, 4, 4, 3}}) {
    auto p = hml::init_params(Architecture{sizes}, rng());
    for (std::size_t k = 0; k < p.size(); ++k) p.values[k] += 0.1 * testing::random_vector(rng, 1)[0];
    auto sp = hml::to_structured(p);
    for (int trial = 0; trial < 10; ++trial) {
      auto x = testing::random_vector(rng, sizes.front());
      auto got = hml::forward(p, x).logits();
      auto want = oracle_forward(sp, x);
      REQUIRE(got.size() == sizes.back());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
      CHECK(hml::predict_logits(p, x) == got);
      CHECK(hml::forward(p, x).logits() == got);
    }
  }
}

TEST_CASE("softmax examples") {
  auto p = hml::softmax(Vector{0, 0});
  CHECK(p == Vector{0.5, 0.5});
  auto q = hml::softmax(Vector{std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(std::abs(q[0] - 1.0 / 6) < 1e-15);
  CHECK(std::abs(q[1] - 2.0 / 6) < 1e-15);
  CHECK(std::abs(q[2] - 3.0 / 6) < 1e-15);
  CHECK(kind_of([] { hml::softmax(Vector{0, std::nan("")}); }) == ErrorKind::Domain);
  CHECK(kind_of([] { hml::log_softmax(Vector{std::nan("")}); }) == ErrorKind::Domain);
}

TEST_CASE("softmax properties") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto z = testing::random_vector(rng, 2 + trial % 15, 5.0);
    auto p = hml::softmax(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    const double c = 100.0 * testing::random_vector(rng, 1)[0];
    Vector shifted = z;
    for (double& v : shifted) v += c;
    auto ps = hml::softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(ps[i] - p[i]) <= 1e-12);
    auto lp = hml::log_softmax(z);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(std::exp(lp[i]) - p[i]) <= 1e-12);
  }
  // Large logits do not overflow.
  auto big = hml::softmax(Vector{1000, 1000});
  CHECK(big == Vector{0.5, 0.5});
}

TEST_CASE("backward examples") {
  Architecture arch{{3, 5, 2}};
  auto p = hml::init_params(arch, 3);
  auto rec = hml::forward(p, Vector{1, -1, 2});
  auto g = hml::backward(p, rec, Vector{0, 0});
  for (double v : g.values) CHECK(v == 0.0);

  Architecture lin{{3, 2}};
  auto q = hml::init_params(lin, 7);
  const Vector x{0.3, -1.2, 2.5};
  auto gl = hml::backward(q, hml::forward(q, x), Vector{1, 0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(gl.values[i] == x[i]);
  for (std::size_t i = 3; i < 6; ++i) CHECK(gl.values[i] == 0.0);
  CHECK(gl.values[6] == 1.0);
  CHECK(gl.values[7] == 0.0);

  CHECK(kind_of([&] { hml::backward(p, rec, Vector{1, 2, 3}); }) == ErrorKind::Shape);
}

TEST_CASE("backward matches central finite differences") {
  std::mt19937_64 rng(10);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{4, 3}, {6, 8, 5}, {16, 32, 16}, {3, 4, 4, 2}}) {
    auto p = hml::init_params(Architecture{sizes}, rng());
    auto x = testing::random_vector(rng, sizes.front());
    auto coef = testing::random_vector(rng, sizes.back());
    // Scalar loss: a fixed random linear functional of the logits plus a square.
    auto loss = [&](const Vector& theta) {
      ParamVector q = p;
      q.values = theta;
      auto z = hml::forward(q, x).logits();
      double v = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) v += coef[i] * z[i] + 0.5 * z[i] * z[i];
      return v;
    };
    auto rec = hml::forward(p, x);
    Vector dz(sizes.back());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = coef[i] + rec.logits()[i];
    auto g = hml::backward(p, rec, dz);
    auto res = testing::check_gradient(loss, p.values, g.values, 100, rng());
    CHECK(res.worst <= 1e-4);
  }
}

TEST_CASE("backward_into accumulates with scale") {
  auto p = hml::init_params(Architecture{{3, 4, 2}}, 1);
  auto rec = hml::forward(p, Vector{1, 2, 3});
  auto g = hml::backward(p, rec, Vector{0.5, -1});
  Vector acc(p.size(), 1.0);
  hml::backward_into(p, rec, Vector{0.5, -1}, acc, 2.0);
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == doctest::Approx(1.0 + 2.0 * g.values[i]));
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  testing::TempDir dir;
  auto p = hml::init_params(Architecture{{16, 32, 10}}, 12345);
  p.values[3] = -0.0;
  p.values[4] = 1e-310;  // subnormal
  hml::write_checkpoint(p, dir / "m.ckpt");
  auto back = hml::read_checkpoint(dir / "m.ckpt");
  CHECK(back.arch == p.arch);
  CHECK(back.seed == 12345);
  REQUIRE(back.size() == p.size());
  CHECK(std::memcmp(back.values.data(), p.values.data(), p.size() * sizeof(double)) == 0);
}

TEST_CASE("damaged checkpoints are integrity errors") {
  testing::TempDir dir;
  auto p = hml::init_params(Architecture{{4, 3, 2}}, 1);
  hml::write_checkpoint(p, dir / "m.ckpt");
  const std::string good = testing::read_text(dir / "m.ckpt");

  auto try_read = [&](const std::string& text) {
    testing::write_text(dir / "x.ckpt", text);
    return kind_of([&] { hml::read_checkpoint(dir / "x.ckpt"); });
  };
  // Flip one value.
  std::string flipped = good;
  const auto pos = flipped.find('\n') + 1;
  flipped.replace(pos, flipped.find('\n', pos) - pos, "0x1.8p+0");
  CHECK(try_read(flipped) == ErrorKind::Integrity);
  // Truncated.
  CHECK(try_read(good.substr(0, good.rfind('\n', good.size() - 2) + 1)) == ErrorKind::Integrity);
  // Garbage value.
  CHECK(try_read(good + "zzz\n") == ErrorKind::Integrity);
  // Wrong magic.
  CHECK(try_read("not-a-checkpoint\n") == ErrorKind::Integrity);
  CHECK(try_read("") == ErrorKind::Integrity);
  CHECK(kind_of([&] { hml::read_checkpoint(dir / "missing.ckpt"); }) == ErrorKind::Integrity);
}

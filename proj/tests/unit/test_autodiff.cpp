#include <doctest.h>

#include <cmath>
#include <limits>

#include "support/finite_diff.hpp"
#include "support/generators.hpp"
#include "uae/autodiff.hpp"
#include "uae/error.hpp"

using namespace uae;
using uae::testing::check_gradients;
using uae::testing::rand_int;
using ad::Matrixd;

namespace {

Matrixd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -2, double hi = 2) {
  Matrixd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * uniform01(rng);
  return m;
}

// Keeps values away from relu's and max's kinks so differences are smooth.
Matrixd away_from_zero(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrixd m = random_matrix(rng, r, c, 0.1, 2.0);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (uniform01(rng) < 0.5) m.data()[i] = -m.data()[i];
  }
  return m;
}

// Weighted sum so every output entry gets a distinct upstream gradient.
ad::Variable weighted(ad::Tape& tape, const ad::Variable& x, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(x, tape.constant(random_matrix(rng, x.rows(), x.cols()))));
}

}  // namespace

TEST_CASE("matmul forward examples") {
  ad::Tape tape;
  Matrixd m(2, 2);
  m << 1, 2, 3, 4;
  const auto id = tape.constant(Matrixd::Identity(2, 2));
  CHECK(ad::matmul(id, tape.constant(m)).value() == m);
  Matrixd b(2, 1);
  b << 0, 1;
  Matrixd expect(2, 1);
  expect << 2, 4;
  CHECK(ad::matmul(tape.constant(m), tape.constant(b)).value() == expect);
  CHECK_THROWS_AS(ad::matmul(tape.constant(m), tape.constant(Matrixd::Ones(3, 1))), ContractError);
}

TEST_CASE("matmul gradient matches central differences") {
  Rng rng(7);
  const auto r = check_gradients({random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)},
                                 [](ad::Tape& t, const auto& v) { return weighted(t, ad::matmul(v[0], v[1]), 1); });
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("log_softmax examples") {
  ad::Tape tape;
  Matrixd x(1, 2);
  x << 0, 0;
  const auto y = ad::log_softmax(tape.constant(x));
  CHECK(y.value()(0, 0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(y.value()(0, 1) == doctest::Approx(std::log(0.5)).epsilon(1e-15));

  Matrixd masked(1, 2);
  masked << -std::numeric_limits<double>::infinity(), 0;
  const auto z = ad::log_softmax(ad::masked_fill(tape.constant(masked), ad::Mask::Constant(1, 2, false), 0.0));
  CHECK(ad::is_neg_inf(z.value()(0, 0)));
  CHECK(z.value()(0, 1) == 0.0);
  CHECK(std::exp(z.value()(0, 0)) == 0.0);

  Matrixd dead = Matrixd::Constant(1, 3, ad::neg_inf<double>());
  CHECK_THROWS_AS(ad::log_softmax(tape.constant(dead)), NumericError);
}

TEST_CASE("log_softmax rows normalize and differentiate") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrixd x = random_matrix(rng, 3, 6, -4, 4);
    ad::Tape tape;
    const auto y = ad::log_softmax(tape.constant(x));
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(y.value().row(r).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));
    const auto g = check_gradients({x}, [](ad::Tape& t, const auto& v) { return weighted(t, ad::log_softmax(v[0]), 3); });
    CHECK(g.max_rel_error <= 1e-6);
  }
}

TEST_CASE("masked_fill examples and zero gradient at filled entries") {
  ad::Tape tape;
  Matrixd x(1, 3);
  x << 1, 2, 3;
  ad::Mask mask(1, 3);
  mask << false, true, false;
  const auto y = ad::masked_fill(tape.constant(x), mask, -std::numeric_limits<double>::infinity());
  CHECK(y.value()(0, 0) == 1);
  CHECK(ad::is_neg_inf(y.value()(0, 1)));
  CHECK(y.value()(0, 2) == 3);
  CHECK(ad::masked_fill(tape.constant(x), ad::Mask::Constant(1, 3, false), 9.0).value() == x);
  CHECK_THROWS_AS(ad::masked_fill(tape.constant(x), ad::Mask::Constant(1, 2, false), 0.0), ContractError);

  Rng rng(5);
  const Matrixd p = random_matrix(rng, 2, 5);
  ad::Mask m(2, 5);
  m << true, false, false, true, false, false, false, true, false, false;
  const auto fn = [&](ad::Tape& t, const std::vector<ad::Variable>& v) {
    return weighted(t, ad::softmax(ad::masked_fill(v[0], m, ad::neg_inf<double>())), 9);
  };
  const auto g = check_gradients({p}, fn);
  CHECK(g.max_rel_error <= 1e-6);
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index c = 0; c < 5; ++c) {
      if (m(r, c)) CHECK(g.analytic[0](r, c) == 0.0);
    }
  }
  ad::Tape t2;
  const auto probs = ad::softmax(ad::masked_fill(t2.constant(p), m, ad::neg_inf<double>()));
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index c = 0; c < 5; ++c) {
      if (m(r, c)) CHECK(probs.value()(r, c) <= 1e-300);
    }
  }
}

TEST_CASE("backward contract and analytic examples") {
  ad::Tape tape;
  const auto w = tape.parameter(Matrixd(Eigen::RowVectorXd::LinSpaced(5, 1, 5)));
  tape.backward(ad::sum(w));
  CHECK(tape.grad(w) == Matrixd::Ones(1, 5));

  tape.backward(ad::sum(ad::mul(w, w)) * 0.5);
  CHECK(tape.grad(w) == w.value());

  CHECK_THROWS_AS(tape.backward(w), ContractError);

  // Constants never receive gradients; unreachable parameters stay zero.
  const auto c = tape.constant(Matrixd::Ones(1, 5));
  const auto unused = tape.parameter(Matrixd::Ones(2, 2));
  tape.backward(ad::sum(ad::mul(w, c)));
  CHECK(tape.grad(c).isZero());
  CHECK(tape.grad(unused).isZero());
  CHECK_FALSE(ad::mul(c, c).requires_grad());
}

TEST_CASE("every op passes a finite-difference check on random shapes") {
  Rng rng(2024);
  using Fn = std::function<ad::Variable(ad::Tape&, const std::vector<ad::Variable>&)>;
  struct Case {
    const char* name;
    int arity;
    bool positive;
    Fn fn;
  };
  const std::vector<Case> cases = {
      {"add", 2, false, [](auto& t, const auto& v) { return weighted(t, v[0] + v[1], 1); }},
      {"sub", 2, false, [](auto& t, const auto& v) { return weighted(t, v[0] - v[1], 2); }},
      {"mul", 2, false, [](auto& t, const auto& v) { return weighted(t, ad::mul(v[0], v[1]), 3); }},
      {"div", 2, true, [](auto& t, const auto& v) { return weighted(t, ad::div(v[0], v[1]), 4); }},
      {"scale", 1, false, [](auto& t, const auto& v) { return weighted(t, v[0] * 1.7 + 0.3, 5); }},
      {"neg", 1, false, [](auto& t, const auto& v) { return weighted(t, -v[0], 6); }},
      {"relu", 1, false, [](auto& t, const auto& v) { return weighted(t, ad::relu(v[0]), 7); }},
      {"exp", 1, false, [](auto& t, const auto& v) { return weighted(t, ad::exp(v[0]), 8); }},
      {"log", 1, true, [](auto& t, const auto& v) { return weighted(t, ad::log(v[0]), 9); }},
      {"clamp_min", 1, false, [](auto& t, const auto& v) { return weighted(t, ad::clamp_min(v[0], 0.05), 10); }},
      {"maximum", 2, false, [](auto& t, const auto& v) { return weighted(t, ad::maximum(v[0], v[1]), 11); }},
      {"mean", 1, false, [](auto&, const auto& v) { return ad::mean(ad::mul(v[0], v[0])); }},
      {"row_sum", 1, false, [](auto& t, const auto& v) { return weighted(t, ad::row_sum(ad::mul(v[0], v[0])), 12); }},
      {"softmax", 1, false, [](auto& t, const auto& v) { return weighted(t, ad::softmax(v[0]), 13); }},
      {"concat", 2, false, [](auto& t, const auto& v) { return weighted(t, ad::concat({v[0], ad::exp(v[1])}), 14); }},
      {"gather", 1, false,
       [](auto& t, const auto& v) {
         std::vector<ad::Index> idx;
         for (ad::Index r = 0; r < v[0].rows(); ++r) idx.push_back((r * 3) % v[0].cols());
         return weighted(t, ad::gather(v[0], idx), 15);
       }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 8; ++trial) {
      const int r = rand_int(rng, 1, 4);
      const int k = rand_int(rng, 1, 5);
      std::vector<Matrixd> pts;
      for (int a = 0; a < c.arity; ++a) pts.push_back(c.positive ? random_matrix(rng, r, k, 0.5, 2.0) : away_from_zero(rng, r, k));
      if (std::string(c.name) == "maximum") pts[1] = pts[0] + away_from_zero(rng, r, k) * 0.5;
      const auto g = check_gradients(pts, c.fn);
      CHECK(g.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("add_bias broadcasts one row and sums its gradient") {
  Rng rng(3);
  const auto g = check_gradients({random_matrix(rng, 4, 3), random_matrix(rng, 1, 3)},
                                 [](auto& t, const auto& v) { return weighted(t, ad::add_bias(v[0], v[1]), 21); });
  CHECK(g.max_rel_error <= 1e-6);
  ad::Tape tape;
  CHECK_THROWS_AS(ad::add_bias(tape.constant(Matrixd::Ones(2, 3)), tape.constant(Matrixd::Ones(2, 3))), ContractError);
  CHECK_THROWS_AS(ad::add(tape.constant(Matrixd::Ones(2, 3)), tape.constant(Matrixd::Ones(1, 3))), ContractError);
}

TEST_CASE("q-error kink ops pick the documented branch") {
  ad::Tape tape;
  const auto a = tape.parameter(Matrixd::Constant(1, 1, 2.0));
  const auto b = tape.parameter(Matrixd::Constant(1, 1, 2.0));
  tape.backward(ad::sum(ad::maximum(a, b)));
  CHECK(tape.grad(a)(0, 0) == 1.0);
  CHECK(tape.grad(b)(0, 0) == 0.0);
  const auto one = tape.parameter(Matrixd::Constant(1, 1, 1.0));
  tape.backward(ad::sum(ad::clamp_min(one, 1.0)));
  CHECK(tape.grad(one)(0, 0) == 0.0);
}

TEST_CASE("tape replay is bit-identical") {
  Rng rng(99);
  const Matrixd a = random_matrix(rng, 5, 7);
  const Matrixd b = random_matrix(rng, 7, 3);
  const auto run = [&] {
    ad::Tape tape;
    const auto y = ad::log_softmax(ad::relu(ad::matmul(tape.parameter(a), tape.parameter(b))));
    return Matrixd(y.value());
  };
  const Matrixd first = run();
  const Matrixd second = run();
  CHECK(std::memcmp(first.data(), second.data(), sizeof(double) * static_cast<std::size_t>(first.size())) == 0);
}

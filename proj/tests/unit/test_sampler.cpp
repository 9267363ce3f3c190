#include <doctest.h>

#include <cmath>

#include "support/finite_diff.hpp"
#include "support/generators.hpp"
#include "uae/error.hpp"
#include "uae/sampler.hpp"

using namespace uae;
using uae::testing::rand_int;
using uae::testing::random_domains;
using uae::testing::random_model;
using uae::testing::random_region;

namespace {

// Direct per-tuple summation of density over the region.
double brute_force(const ResMade& model, const QueryRegion& region) {
  const auto n = region.num_columns();
  std::vector<Code> cur(n, 0);
  double total = 0;
  while (true) {
    if (region.contains(cur)) total += density(model, cur);
    std::size_t c = 0;
    while (c < n && ++cur[c] == static_cast<Code>(region.allowed[c].size())) cur[c++] = 0;
    if (c == n) break;
  }
  return total;
}

QueryRegion point_region(const std::vector<Code>& domains, const std::vector<Code>& tuple) {
  QueryRegion r = QueryRegion::full(domains, false);
  for (std::size_t c = 0; c < domains.size(); ++c) {
    r.allowed[c].setConstant(false);
    r.allowed[c][tuple[c]] = true;
  }
  return r;
}

}  // namespace

TEST_CASE("exhaustive estimate matches direct summation") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto domains = random_domains(rng, 3, 1, 8);
    const auto model = random_model(rng, domains);
    const auto region = random_region(rng, domains, 0.2);
    CHECK(exhaustive_estimate(model, region) == doctest::Approx(brute_force(model, region)).epsilon(1e-12));
  }
  const std::vector<Code> domains{4, 5, 3};
  const auto model = random_model(rng, domains);
  CHECK(exhaustive_estimate(model, QueryRegion::full(domains)) == doctest::Approx(1.0).epsilon(1e-6));
  const std::vector<Code> tuple{3, 1, 2};
  CHECK(exhaustive_estimate(model, point_region(domains, tuple)) == doctest::Approx(density(model, tuple)).epsilon(1e-12));
  CHECK_THROWS_AS(exhaustive_estimate(model, QueryRegion::full(domains), 10), ValidationError);
}

TEST_CASE("point and full regions are exact for both samplers") {
  Rng rng(2);
  const std::vector<Code> domains{4, 6, 3, 5};
  const auto model = random_model(rng, domains);
  const std::vector<Code> tuple{1, 5, 0, 2};
  const double truth = density(model, tuple);
  const auto point = point_region(domains, tuple);
  const auto prog = progressive_sample_draws(model, point, 7, rng);
  for (int s = 0; s < 7; ++s) CHECK(prog[s] == doctest::Approx(truth).epsilon(1e-12));
  CHECK(uniform_sample_estimate(model, point, 3, rng) == doctest::Approx(truth).epsilon(1e-12));
  CHECK(progressive_sample_estimate(model, QueryRegion::full(domains, false), 5, rng) == 1.0);
  CHECK(progressive_sample_estimate(model, QueryRegion::full(domains, true), 5, rng) == 1.0);
}

TEST_CASE("samplers are unbiased against the exhaustive oracle") {
  Rng rng(3);
  int outside = 0;
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    const auto domains = random_domains(rng, rand_int(rng, 2, 4), 2, 6);
    const auto model = random_model(rng, domains);
    const auto region = random_region(rng, domains);
    const double truth = exhaustive_estimate(model, region);
    for (int method = 0; method < 2; ++method) {
      const Eigen::VectorXd d = method == 0 ? progressive_sample_draws(model, region, 20000, rng)
                                            : uniform_sample_draws(model, region, 20000, rng);
      const double mean = d.mean();
      const double se = std::sqrt((d.array() - mean).square().sum() / (d.size() - 1) / d.size());
      if (std::abs(mean - truth) > 3 * se + 1e-12) ++outside;
    }
  }
  // 20 comparisons at 3 sigma: more than two misses would be very unlikely.
  CHECK(outside <= 2);
}

TEST_CASE("progressive sampling skips wildcard columns") {
  Rng rng(4);
  const std::vector<Code> domains{3, 4, 5};
  const auto model = random_model(rng, domains, false);
  QueryRegion r = QueryRegion::full(domains, false);
  r.allowed[0] << true, false, true;
  QueryRegion wild = r;
  wild.wildcard[1] = true;
  wild.wildcard[2] = true;
  // With later columns unqueried the estimate is exactly the first marginal mass.
  const Matrix logits = model.logits(model.hidden(model.encoding().all_wildcards()), 0);
  const RowVector p = (logits.array() - logits.maxCoeff()).exp().matrix() / (logits.array() - logits.maxCoeff()).exp().sum();
  const double mass = p[0] + p[2];
  CHECK(progressive_sample_estimate(model, wild, 11, rng) == doctest::Approx(mass).epsilon(1e-12));
}

TEST_CASE("gumbel noise and gs_sample basics") {
  Matrix u(1, 4);
  u << 0.0, 1.0, 0.5, 1e-300;
  const Matrix g = gumbel(u);
  CHECK(g.allFinite());

  ad::Tape tape;
  const auto one = gs_sample(tape.constant(Matrix::Zero(2, 1)), Matrix::Constant(2, 1, 0.3), 0.1);
  CHECK(one.value() == Matrix::Ones(2, 1));

  Rng rng(5);
  Matrix logp(1, 5);
  logp << std::log(0.1), std::log(0.2), std::log(0.3), std::log(0.15), std::log(0.25);
  ad::Mask outside(1, 5);
  outside << false, true, false, true, false;
  const auto masked = ad::log_softmax(ad::masked_fill(tape.constant(logp), outside, ad::neg_inf<double>()));
  for (int i = 0; i < 50; ++i) {
    Matrix uu(1, 5);
    for (int k = 0; k < 5; ++k) uu(0, k) = uniform01(rng);
    const auto y = gs_sample(masked, uu, 0.7);
    CHECK(y.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.value()(0, 1) == 0.0);
    CHECK(y.value()(0, 3) == 0.0);
  }
  CHECK_THROWS_AS(gs_sample(masked, Matrix::Constant(1, 5, 0.5), 0.0), ValidationError);
}

TEST_CASE("gs_sample gradient with frozen noise") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix logits(3, 6), u(3, 6);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      logits.data()[i] = 4 * uniform01(rng) - 2;
      u.data()[i] = uniform01(rng);
    }
    Matrix w = Matrix::Random(3, 6);
    const auto g = testing::check_gradients({logits}, [&](ad::Tape& t, const std::vector<ad::Variable>& v) {
      return ad::sum(ad::mul(gs_sample(ad::log_softmax(v[0]), u, 0.8), t.constant(w)));
    });
    CHECK(g.max_rel_error <= 1e-5);
  }
}

TEST_CASE("gumbel-max draws follow the categorical law") {
  Rng rng(7);
  const int k = 6;
  RowVector pi(k);
  for (int i = 0; i < k; ++i) pi[i] = 0.2 + uniform01(rng);
  pi /= pi.sum();
  const int draws = 60000;
  std::vector<int> counts(k, 0);
  Matrix u(1, k);
  for (int d = 0; d < draws; ++d) {
    for (int i = 0; i < k; ++i) u(0, i) = uniform01(rng);
    const RowVector score = pi.array().log().matrix() + gumbel(u).row(0);
    Eigen::Index arg;
    score.maxCoeff(&arg);
    ++counts[static_cast<std::size_t>(arg)];
  }
  double chi2 = 0;
  for (int i = 0; i < k; ++i) {
    const double e = draws * pi[i];
    chi2 += (counts[static_cast<std::size_t>(i)] - e) * (counts[static_cast<std::size_t>(i)] - e) / e;
  }
  // 5 degrees of freedom: P(chi2 > 20.52) = 0.001.
  CHECK(chi2 < 20.52);
}

TEST_CASE("dps on a point query is the exact density") {
  Rng rng(8);
  const std::vector<Code> domains{4, 3, 6};
  const auto model = random_model(rng, domains);
  const std::vector<Code> tuple{2, 0, 5};
  const auto noise = GumbelNoise::draw(model.encoding(), 9, rng);
  ad::Tape tape;
  const auto est = dps_estimate(model.bind(tape), point_region(domains, tuple), 1.0, noise);
  CHECK(est.item() == doctest::Approx(density(model, tuple)).epsilon(1e-12));
}

TEST_CASE("dps batch equals the per-sample loop with matched noise") {
  Rng rng(9);
  const std::vector<Code> domains{5, 4, 6, 3};
  auto model = random_model(rng, domains);
  const auto region = random_region(rng, domains, 0.25);
  const int S = 6;
  const auto noise = GumbelNoise::draw(model.encoding(), S, rng);

  ad::Tape batch_tape;
  const auto batch_bound = model.bind(batch_tape);
  const auto batch = dps_estimate(batch_bound, region, 1.0, noise);
  batch_tape.backward(batch);
  const auto batch_grads = batch_bound.gradients();

  double loop_value = 0;
  std::vector<Matrix> loop_grads;
  for (int s = 0; s < S; ++s) {
    ad::Tape tape;
    const auto bound = model.bind(tape);
    const auto est = dps_estimate(bound, region, 1.0, noise.row(s));
    loop_value += est.item() / S;
    tape.backward(est);
    const auto g = bound.gradients();
    if (loop_grads.empty()) {
      for (const auto& m : g) loop_grads.push_back(m / S);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) loop_grads[i] += g[i] / S;
    }
  }
  CHECK(batch.item() == doctest::Approx(loop_value).epsilon(1e-12));
  for (std::size_t i = 0; i < loop_grads.size(); ++i) {
    CHECK((batch_grads[i] - loop_grads[i]).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, loop_grads[i].cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("dps gradient matches frozen-noise finite differences") {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto domains = random_domains(rng, rand_int(rng, 2, 4), 2, 6);
    auto model = random_model(rng, domains);
    const auto region = random_region(rng, domains, 0.2);
    const auto noise = GumbelNoise::draw(model.encoding(), 4, rng);
    const double tau = 0.5 + uniform01(rng);
    const auto g = testing::check_model_gradients(
        model, [&](const BoundModel& b) { return dps_estimate(b, region, tau, noise); }, 1e-5, 2);
    CHECK(g.norm_rel_error <= 1e-4);
  }
}

TEST_CASE("dps forward mean tracks the oracle on a tiny model") {
  Rng rng(11);
  const std::vector<Code> domains{3, 4, 3};
  const auto model = random_model(rng, domains);
  const auto region = random_region(rng, domains);
  const double truth = exhaustive_estimate(model, region);
  const auto noise = GumbelNoise::draw(model.encoding(), 20000, rng);
  ad::Tape tape;
  // The relaxation is biased at moderate temperature; near one-hot it matches
  // progressive sampling.
  const double est = dps_estimate(model.bind(tape), region, 0.01, noise).item();
  CHECK(std::abs(est - truth) <= 0.05 * truth);
}

TEST_CASE("empty regions and config validation") {
  Rng rng(12);
  const std::vector<Code> domains{3, 3};
  const auto model = random_model(rng, domains);
  QueryRegion r = QueryRegion::full(domains, false);
  r.allowed[1].setConstant(false);
  CHECK(exhaustive_estimate(model, r) == 0.0);
  CHECK(progressive_sample_estimate(model, r, 4, rng) == 0.0);
  ad::Tape tape;
  CHECK(dps_estimate(model.bind(tape), r, 1.0, GumbelNoise::draw(model.encoding(), 2, rng)).item() == 0.0);
  CHECK_THROWS_AS(validate(SamplerConfig{0.0, 10, 0}), ValidationError);
  CHECK_THROWS_AS(validate(SamplerConfig{1.0, 0, 0}), ValidationError);
  CHECK(floor_selectivity(0.0, 100) == 0.01);
  CHECK(floor_selectivity(0.5, 100) == 0.5);
}

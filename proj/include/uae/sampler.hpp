#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "uae/autodiff.hpp"
#include "uae/model.hpp"
#include "uae/random.hpp"
#include "uae/region.hpp"

namespace uae {

struct SamplerConfig {
  double tau = 1.0;
  int samples = 200;
  std::uint64_t seed = 0;
};

void validate(const SamplerConfig& config);

// Sum of the model density over every tuple in the region. Wildcard columns
// are summed over their full domain.
double exhaustive_estimate(const ResMade& model, const QueryRegion& region, double cap = 1e6);

// Per-sample estimates |R| * P(x^s) with x^s uniform over the region.
Eigen::VectorXd uniform_sample_draws(const ResMade& model, const QueryRegion& region, int samples, Rng& rng);
double uniform_sample_estimate(const ResMade& model, const QueryRegion& region, int samples, Rng& rng);

// Per-sample estimates prod_i P(X_i in R_i | x_<i) along hard progressive
// samples. Wildcard columns contribute a factor of 1 and keep their wildcard
// token as input.
Eigen::VectorXd progressive_sample_draws(const ResMade& model, const QueryRegion& region, int samples, Rng& rng);
double progressive_sample_estimate(const ResMade& model, const QueryRegion& region, int samples, Rng& rng);

// Uniform draws feeding the Gumbel noise of one DPS run: one samples x |A_c|
// block per column. Kept separate so a run can be replayed with frozen noise.
struct GumbelNoise {
  std::vector<Matrix> uniforms;

  static GumbelNoise draw(const InputEncoding& encoding, int samples, Rng& rng);
  int samples() const { return uniforms.empty() ? 0 : static_cast<int>(uniforms.front().rows()); }
  GumbelNoise row(int s) const;
};

// g = -log(-log u), u clamped to [1e-12, 1 - 1e-12].
Matrix gumbel(const Matrix& uniforms);

// y = softmax((logpi + g) / tau), row-wise. The noise is a tape constant.
ad::Variable gs_sample(const ad::Variable& logpi, const Matrix& uniforms, double tau);

// Differentiable progressive sampling: the selectivity estimate for one
// region as a scalar tape node, averaged over noise.samples() soft samples.
ad::Variable dps_estimate(const BoundModel& model, const QueryRegion& region, double tau, const GumbelNoise& noise);

// Estimate floor of one tuple's worth of selectivity.
inline double floor_selectivity(double sel, std::uint64_t row_count) {
  const double lo = 1.0 / static_cast<double>(row_count ? row_count : 1);
  return sel < lo ? lo : sel;
}

}  // namespace uae

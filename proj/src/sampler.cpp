#include "uae/sampler.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>

#include "uae/error.hpp"

namespace uae {
namespace {

constexpr double kZeroMass = 1e-300;

void check_region(const ResMade& model, const QueryRegion& region) {
  if (region.num_columns() != model.num_columns()) throw ContractError("region does not match the model's columns");
  for (std::size_t c = 0; c < region.num_columns(); ++c) {
    if (region.allowed[c].size() != model.encoding().domain_size(c)) {
      throw ContractError(fmt::format("region mask for column {} has the wrong length", c));
    }
  }
}

// Position of the last column that needs sampling, or -1 when every column is a wildcard.
int last_active_position(const ResMade& model, const QueryRegion& region) {
  for (int p = static_cast<int>(model.num_columns()) - 1; p >= 0; --p) {
    if (!region.wildcard[model.column_at(p)]) return p;
  }
  return -1;
}

std::vector<Code> allowed_codes(const QueryRegion& region, std::size_t col) {
  std::vector<Code> out;
  const auto& m = region.allowed[col];
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    if (m[k]) out.push_back(static_cast<Code>(k));
  }
  return out;
}

RowVector softmax_row(const Eigen::Ref<const RowVector>& logits) {
  const double m = logits.maxCoeff();
  RowVector p = (logits.array() - m).exp().matrix();
  return p / p.sum();
}

}  // namespace

void validate(const SamplerConfig& config) {
  if (!(config.tau > 0)) throw ValidationError("temperature must be positive");
  if (config.samples < 1) throw ValidationError("sample count must be at least 1");
}

double exhaustive_estimate(const ResMade& model, const QueryRegion& region, double cap) {
  check_region(model, region);
  if (region.empty()) return 0.0;
  if (region.volume() > cap) {
    throw ValidationError(fmt::format("region holds {} tuples, above the enumeration cap {}", region.volume(), cap));
  }
  const std::size_t n = model.num_columns();
  const auto& enc = model.encoding();

  std::vector<Code> prefixes(n, 0);
  std::vector<double> probs{1.0};
  constexpr std::size_t kChunk = 4096;

  for (int p = 0; p < static_cast<int>(n); ++p) {
    const std::size_t col = model.column_at(p);
    const auto codes = allowed_codes(region, col);
    const std::size_t count = probs.size();
    std::vector<Code> next_prefixes;
    std::vector<double> next_probs;
    next_prefixes.reserve(count * codes.size() * n);
    next_probs.reserve(count * codes.size());

    for (std::size_t at = 0; at < count; at += kChunk) {
      const std::size_t m = std::min(kChunk, count - at);
      ad::Mask unset(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      for (std::size_t c = 0; c < n; ++c) unset.col(static_cast<Eigen::Index>(c)).setConstant(model.position(c) >= p);
      const Matrix inputs = enc.encode(std::span<const Code>(prefixes).subspan(at * n, m * n), m, &unset);
      const Matrix logits = model.logits(model.hidden(inputs), col);
      for (std::size_t r = 0; r < m; ++r) {
        const RowVector dist = softmax_row(logits.row(static_cast<Eigen::Index>(r)));
        for (Code code : codes) {
          const std::size_t src = (at + r) * n;
          next_prefixes.insert(next_prefixes.end(), prefixes.begin() + static_cast<std::ptrdiff_t>(src),
                               prefixes.begin() + static_cast<std::ptrdiff_t>(src + n));
          next_prefixes[next_prefixes.size() - n + col] = code;
          next_probs.push_back(probs[at + r] * dist[code]);
        }
      }
    }
    prefixes = std::move(next_prefixes);
    probs = std::move(next_probs);
  }
  double total = 0;
  for (double v : probs) total += v;
  return total;
}

Eigen::VectorXd uniform_sample_draws(const ResMade& model, const QueryRegion& region, int samples, Rng& rng) {
  check_region(model, region);
  if (samples < 1) throw ValidationError("sample count must be at least 1");
  if (region.empty()) return Eigen::VectorXd::Zero(samples);
  const std::size_t n = model.num_columns();
  std::vector<std::vector<Code>> codes(n);
  for (std::size_t c = 0; c < n; ++c) codes[c] = allowed_codes(region, c);

  std::vector<Code> tuples(static_cast<std::size_t>(samples) * n);
  for (int s = 0; s < samples; ++s) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(codes[c].size()));
      tuples[static_cast<std::size_t>(s) * n + c] = codes[c][std::min(k, codes[c].size() - 1)];
    }
  }
  const auto dens = density(model, tuples, static_cast<std::size_t>(samples));
  const double volume = region.volume();
  Eigen::VectorXd out(samples);
  for (int s = 0; s < samples; ++s) out[s] = volume * dens[static_cast<std::size_t>(s)];
  return out;
}

double uniform_sample_estimate(const ResMade& model, const QueryRegion& region, int samples, Rng& rng) {
  return uniform_sample_draws(model, region, samples, rng).mean();
}

Eigen::VectorXd progressive_sample_draws(const ResMade& model, const QueryRegion& region, int samples, Rng& rng) {
  check_region(model, region);
  if (samples < 1) throw ValidationError("sample count must be at least 1");
  if (region.empty()) return Eigen::VectorXd::Zero(samples);
  const auto& enc = model.encoding();
  const int last = last_active_position(model, region);

  Eigen::VectorXd estimate = Eigen::VectorXd::Ones(samples);
  Matrix inputs = enc.all_wildcards().replicate(samples, 1);

  for (int p = 0; p <= last; ++p) {
    const std::size_t col = model.column_at(p);
    if (region.wildcard[col]) continue;
    const auto& mask = region.allowed[col];
    const bool full = mask.all();
    const Matrix logits = model.logits(model.hidden(inputs), col);
    for (int s = 0; s < samples; ++s) {
      const RowVector dist = softmax_row(logits.row(s));
      const double mass = full ? 1.0 : mask.select(dist.array(), 0.0).sum();
      // With no in-region mass the sample contributes 0; draw uniformly to
      // keep the input well defined.
      const bool dead = mass < kZeroMass;
      estimate[s] = dead ? 0.0 : estimate[s] * mass;
      const double target = uniform01(rng) * (dead ? static_cast<double>(mask.count()) : mass);
      double acc = 0;
      Code pick = -1;
      for (Eigen::Index k = 0; k < mask.size(); ++k) {
        if (!mask[k]) continue;
        pick = static_cast<Code>(k);
        acc += dead ? 1.0 : dist[k];
        if (target < acc) break;
      }
      inputs.row(s).segment(enc.offset(col), enc.width(col)) = enc.bit_table(col).row(pick);
    }
  }
  return estimate;
}

double progressive_sample_estimate(const ResMade& model, const QueryRegion& region, int samples, Rng& rng) {
  return progressive_sample_draws(model, region, samples, rng).mean();
}

GumbelNoise GumbelNoise::draw(const InputEncoding& encoding, int samples, Rng& rng) {
  if (samples < 1) throw ValidationError("sample count must be at least 1");
  GumbelNoise noise;
  for (std::size_t c = 0; c < encoding.num_columns(); ++c) {
    Matrix u(samples, encoding.domain_size(c));
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = uniform01(rng);
    noise.uniforms.push_back(std::move(u));
  }
  return noise;
}

GumbelNoise GumbelNoise::row(int s) const {
  GumbelNoise one;
  for (const auto& u : uniforms) one.uniforms.push_back(u.row(s));
  return one;
}

Matrix gumbel(const Matrix& uniforms) {
  const auto u = uniforms.array().max(1e-12).min(1.0 - 1e-12);
  return (-(-u.log()).log()).matrix();
}

ad::Variable gs_sample(const ad::Variable& logpi, const Matrix& uniforms, double tau) {
  if (!(tau > 0)) throw ValidationError("temperature must be positive");
  if (uniforms.rows() != logpi.rows() || uniforms.cols() != logpi.cols()) {
    throw ContractError("gs_sample: noise shape does not match the distribution");
  }
  auto& tape = *logpi.tape();
  const auto h = (logpi + tape.constant(gumbel(uniforms))) * (1.0 / tau);
  return ad::softmax(h);
}

ad::Variable dps_estimate(const BoundModel& model, const QueryRegion& region, double tau, const GumbelNoise& noise) {
  const auto& m = model.model();
  check_region(m, region);
  auto& tape = model.tape();
  const int samples = noise.samples();
  if (samples < 1 || noise.uniforms.size() != m.num_columns()) throw ContractError("dps_estimate: malformed noise");
  if (region.empty()) return tape.constant(ad::Tensord::scalar(0.0));

  const auto& enc = m.encoding();
  const std::size_t n = m.num_columns();
  std::vector<ad::Variable> inputs;
  for (std::size_t c = 0; c < n; ++c) inputs.push_back(tape.constant(Matrix(enc.wildcard_vector(c).replicate(samples, 1))));

  const int last = last_active_position(m, region);
  ad::Variable estimate;
  bool have_estimate = false;
  for (int p = 0; p <= last; ++p) {
    const std::size_t col = m.column_at(p);
    if (region.wildcard[col]) continue;
    const auto& allowed = region.allowed[col];
    const auto logits = model.logits(model.hidden(ad::concat(std::span<const ad::Variable>(inputs))), col);
    const auto logp = ad::log_softmax(logits);

    auto truncated = logp;
    if (!allowed.all()) {
      const Matrix in_region = allowed.cast<double>().matrix().replicate(samples, 1);
      const auto mass = ad::row_sum(ad::mul(ad::exp(logp), tape.constant(in_region)));
      estimate = have_estimate ? ad::mul(estimate, mass) : mass;
      have_estimate = true;
      const ad::Mask outside = (!allowed).replicate(samples, 1);
      truncated = ad::log_softmax(ad::masked_fill(logp, outside, ad::neg_inf<double>()));
    }
    if (p == last) break;
    const auto y = gs_sample(truncated, noise.uniforms[col], tau);
    inputs[col] = ad::matmul(y, tape.constant(enc.bit_table(col)));
  }
  if (!have_estimate) return tape.constant(ad::Tensord::scalar(1.0));
  return ad::mean(estimate);
}

}  // namespace uae

#include "uae/trainer.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "uae/denormals.hpp"
#include "uae/error.hpp"

namespace uae {
namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void add_into(std::vector<Matrix>& acc, const std::vector<Matrix>& g, double weight) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * g[i];
}

}  // namespace

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::data_only: return "data-only";
    case TrainMode::query_only: return "query-only";
    case TrainMode::hybrid: return "hybrid";
  }
  return "?";
}

TrainMode parse_mode(std::string_view text) {
  if (text == "data-only" || text == "data") return TrainMode::data_only;
  if (text == "query-only" || text == "query") return TrainMode::query_only;
  if (text == "hybrid") return TrainMode::hybrid;
  throw ValidationError(fmt::format("unknown training mode '{}'", text));
}

Adam::Adam(AdamConfig config, const std::vector<Matrix>& params) : config_(config) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ContractError("Adam: parameter count changed");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

void validate(const TrainingConfig& config) {
  if (!(config.lambda >= 0) || !std::isfinite(config.lambda)) throw ValidationError("lambda must be a finite value >= 0");
  if (config.data_batch < 1 || config.query_batch < 1) throw ValidationError("batch sizes must be at least 1");
  if (config.epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(config.adam.lr > 0)) throw ValidationError("learning rate must be positive");
  if (!(config.wildcard_prob >= 0 && config.wildcard_prob < 1)) throw ValidationError("wildcard rate must be in [0, 1)");
  if (config.query_group < 1) throw ValidationError("query group must be at least 1");
  validate(config.sampler);
}

double qerror(double true_sel, double est_sel) {
  if (!(true_sel > 0) || !(est_sel > 0)) {
    throw ContractError(fmt::format("q-error needs positive arguments, got {} and {}", true_sel, est_sel));
  }
  return std::max({1.0, true_sel / est_sel, est_sel / true_sel});
}

ad::Variable qerror(const ad::Variable& est, double true_sel, double est_floor) {
  if (!(true_sel > 0) || !(est_floor > 0)) throw ContractError("q-error needs a positive truth and floor");
  auto& tape = *est.tape();
  const auto e = ad::clamp_min(est, est_floor);
  const auto under = ad::div(tape.constant(ad::Tensord(est.shape(), Matrix::Constant(1, 1, true_sel))), e);
  const auto over = e * (1.0 / true_sel);
  return ad::clamp_min(ad::maximum(under, over), 1.0);
}

std::vector<QueryTarget> make_targets(std::span<const LabeledQuery> queries, const Schema& schema,
                                      std::uint64_t row_count) {
  if (row_count == 0) throw ValidationError("row count must be positive");
  std::vector<QueryTarget> out;
  out.reserve(queries.size());
  const double n = static_cast<double>(row_count);
  for (const auto& q : queries) {
    if (q.cardinality < 0 || static_cast<std::uint64_t>(q.cardinality) > row_count) {
      throw ValidationError(fmt::format("cardinality {} outside [0, {}]", q.cardinality, row_count));
    }
    out.push_back({to_region(q.query, schema), std::max<double>(static_cast<double>(q.cardinality), 1.0) / n});
  }
  return out;
}

ad::Variable query_loss(const BoundModel& model, std::span<const QueryTarget> batch, const SamplerConfig& sampler,
                        std::uint64_t row_count, Rng& rng) {
  auto& tape = model.tape();
  if (batch.empty()) return tape.constant(ad::Tensord::scalar(0.0));
  const double floor = 1.0 / static_cast<double>(row_count);
  std::vector<ad::Variable> terms;
  for (const auto& target : batch) {
    const auto noise = GumbelNoise::draw(model.model().encoding(), sampler.samples, rng);
    const auto est = dps_estimate(model, target.region, sampler.tau, noise);
    terms.push_back(qerror(est, target.selectivity, floor));
  }
  auto total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = total + terms[i];
  return ad::sum(total) * (1.0 / static_cast<double>(batch.size()));
}

ad::Mask draw_wildcards(std::size_t rows, std::size_t cols, double prob, Rng& rng) {
  ad::Mask mask(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(rng) < prob;
  return mask;
}

Trainer::Trainer(ResMade& model, const TrainingData& data, TrainingConfig config)
    : model_(model), data_(data), config_(std::move(config)), adam_(config_.adam, model.parameters()) {
  validate(config_);
  const bool uses_data = config_.mode != TrainMode::query_only;
  const bool uses_queries = config_.mode != TrainMode::data_only;
  if (uses_data && (!data_.table || data_.table->row_count() == 0)) {
    throw ValidationError(fmt::format("{} training needs a non-empty table", to_string(config_.mode)));
  }
  if (uses_queries && data_.queries.empty()) {
    throw ValidationError(fmt::format("{} training needs a non-empty workload", to_string(config_.mode)));
  }
  if (data_.row_count == 0) throw ValidationError("row count must be positive");
  if (data_.table && data_.table->num_columns() != model_.num_columns()) {
    throw ValidationError("table columns do not match the model");
  }
  if (uses_queries) targets_ = make_targets(data_.queries, data_.schema, data_.row_count);
}

Rng Trainer::step_rng(Stream stream, long step) const {
  // Streams are keyed by (seed, purpose, step); the purpose sits in the high bits.
  return make_stream(config_.seed, (static_cast<std::uint64_t>(stream) << 48) ^ static_cast<std::uint64_t>(step));
}

double Trainer::accumulate_data(std::span<const std::size_t> rows, Rng& rng, std::vector<Matrix>& grads) {
  const std::size_t n = model_.num_columns();
  std::vector<Code> codes;
  codes.reserve(rows.size() * n);
  for (std::size_t r : rows) {
    const auto row = data_.table->row(r);
    codes.insert(codes.end(), row.begin(), row.end());
  }
  const ad::Mask skipped = draw_wildcards(rows.size(), n, config_.wildcard_prob, rng);
  const Matrix inputs = model_.encoding().encode(codes, rows.size(), &skipped);
  ad::Tape tape;
  const auto bound = model_.bind(tape);
  const auto loss = nll_loss(bound, inputs, codes, &skipped);
  tape.backward(loss);
  add_into(grads, bound.gradients(), 1.0);
  return loss.item();
}

double Trainer::accumulate_queries(std::span<const std::size_t> queries, Rng& rng, double weight,
                                   std::vector<Matrix>& grads) {
  const double scale = 1.0 / static_cast<double>(queries.size());
  const auto group = static_cast<std::size_t>(config_.query_group);
  double total = 0;
  for (std::size_t at = 0; at < queries.size(); at += group) {
    const std::size_t m = std::min(group, queries.size() - at);
    std::vector<QueryTarget> batch;
    batch.reserve(m);
    for (std::size_t i = 0; i < m; ++i) batch.push_back(targets_[queries[at + i]]);
    ad::Tape tape;
    const auto bound = model_.bind(tape);
    // Sum of this group's q-errors over the full batch size, so groups add up to the batch mean.
    const auto part = query_loss(bound, batch, config_.sampler, data_.row_count, rng) *
                      (static_cast<double>(m) * scale);
    total += part.item();
    if (weight != 0.0) {
      tape.backward(part);
      add_into(grads, bound.gradients(), weight);
    }
  }
  return total;
}

StepRecord Trainer::step(std::span<const std::size_t> rows, std::span<const std::size_t> queries) {
  const auto start = std::chrono::steady_clock::now();
  const FlushDenormals ftz;
  auto& params = model_.parameters();
  std::vector<Matrix> grads;
  for (const auto& p : params) grads.push_back(Matrix::Zero(p.rows(), p.cols()));

  StepRecord rec;
  rec.step = step_;
  rec.epoch = epoch_;
  if (config_.mode != TrainMode::query_only && !rows.empty()) {
    Rng rng = step_rng(wildcard_stream, step_);
    rec.data_loss = accumulate_data(rows, rng, grads);
  }
  double weight = 0;
  if (config_.mode == TrainMode::hybrid) weight = config_.lambda;
  if (config_.mode == TrainMode::query_only) weight = 1.0;
  if (config_.mode != TrainMode::data_only && !queries.empty()) {
    Rng rng = step_rng(noise_stream, step_);
    rec.query_loss = accumulate_queries(queries, rng, weight, grads);
  }
  rec.loss = config_.mode == TrainMode::query_only ? rec.query_loss : rec.data_loss + weight * rec.query_loss;

  for (const auto& g : grads) {
    if (!g.allFinite()) throw NumericError(fmt::format("non-finite gradient at step {}", step_));
  }
  adam_.step(params, grads);
  model_.apply_masks();
  ++step_;
  rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<StepRecord> Trainer::run() {
  std::vector<StepRecord> log;
  const bool uses_data = config_.mode != TrainMode::query_only;
  const auto db = static_cast<std::size_t>(config_.data_batch);
  const auto qb = static_cast<std::size_t>(config_.query_batch);

  // Query batches cycle through a reshuffled order, independent of epochs.
  std::vector<std::size_t> query_order = iota(targets_.size());
  std::size_t query_cursor = query_order.size();
  long reshuffles = 0;
  const auto next_queries = [&]() {
    std::vector<std::size_t> out;
    if (targets_.empty()) return out;
    while (out.size() < std::min(qb, targets_.size())) {
      if (query_cursor == query_order.size()) {
        Rng rng = step_rng(query_order_stream, reshuffles++);
        shuffle(query_order, rng);
        query_cursor = 0;
      }
      out.push_back(query_order[query_cursor++]);
    }
    return out;
  };

  for (int e = 0; e < config_.epochs; ++e) {
    epoch_ = e;
    if (uses_data) {
      std::vector<std::size_t> perm = iota(data_.table->row_count());
      Rng rng = step_rng(shuffle_stream, e);
      shuffle(perm, rng);
      for (std::size_t at = 0; at < perm.size(); at += db) {
        const std::span<const std::size_t> rows(perm.data() + at, std::min(db, perm.size() - at));
        const auto queries = next_queries();
        log.push_back(step(rows, queries));
      }
    } else {
      const std::size_t steps = (targets_.size() + qb - 1) / qb;
      for (std::size_t s = 0; s < steps; ++s) {
        const auto queries = next_queries();
        log.push_back(step({}, queries));
      }
    }
    checkpoint(e);
    if (config_.on_epoch) config_.on_epoch(e, model_);
  }
  if (!config_.log_path.empty()) write_step_log(config_.log_path, log);
  return log;
}

void Trainer::checkpoint(int epoch) const {
  if (config_.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(config_.checkpoint_dir);
  save_model(config_.checkpoint_dir / fmt::format("epoch_{:03d}.uae", epoch + 1), model_, data_.schema,
             data_.row_count);
}

std::vector<StepRecord> hybrid_train(ResMade& model, const TrainingData& data, const TrainingConfig& config) {
  Trainer trainer(model, data, config);
  return trainer.run();
}

std::vector<StepRecord> incremental_ingest_data(ResMade& model, const Schema& schema, const EncodedTable& new_rows,
                                                std::uint64_t row_count, int epochs, TrainingConfig config) {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (new_rows.num_columns() != model.num_columns()) throw ValidationError("new rows do not match the model's columns");
  if (new_rows.row_count() == 0 || epochs == 0) return {};
  TrainingData data{schema, row_count, &new_rows, {}};
  config.mode = TrainMode::data_only;
  config.epochs = epochs;
  return hybrid_train(model, data, config);
}

std::vector<StepRecord> incremental_ingest_workload(ResMade& model, const Schema& schema,
                                                    std::span<const LabeledQuery> queries, std::uint64_t row_count,
                                                    int epochs, TrainingConfig config) {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (queries.empty()) throw ValidationError("refinement needs a non-empty workload");
  if (epochs == 0) return {};
  TrainingData data{schema, row_count, nullptr, {queries.begin(), queries.end()}};
  config.mode = TrainMode::query_only;
  config.epochs = epochs;
  return hybrid_train(model, data, config);
}

void write_step_log(const std::filesystem::path& path, std::span<const StepRecord> steps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << "step,L,L_data,L_query,ms\n";
  for (const auto& s : steps) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.3f}\n", s.step, s.loss, s.data_loss, s.query_loss, s.ms);
  }
}

}  // namespace uae

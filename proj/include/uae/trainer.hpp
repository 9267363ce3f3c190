#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "uae/autodiff.hpp"
#include "uae/data.hpp"
#include "uae/model.hpp"
#include "uae/random.hpp"
#include "uae/region.hpp"
#include "uae/sampler.hpp"
#include "uae/workload.hpp"

namespace uae {

enum class TrainMode { data_only, query_only, hybrid };

std::string_view to_string(TrainMode mode);
TrainMode parse_mode(std::string_view text);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(AdamConfig config, const std::vector<Matrix>& params);

  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);
  long steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double loss = 0;
  double data_loss = 0;
  double query_loss = 0;
  double ms = 0;
};

struct TrainingConfig {
  TrainMode mode = TrainMode::hybrid;
  double lambda = 1e-4;
  int data_batch = 512;
  int query_batch = 64;
  int epochs = 20;
  AdamConfig adam;
  SamplerConfig sampler;
  double wildcard_prob = 0.25;
  // Queries per tape when accumulating the query-loss gradient. Only bounds
  // memory; the result does not depend on it beyond rounding.
  int query_group = 8;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path log_path;        // empty: no step log
  std::function<void(int epoch, const ResMade& model)> on_epoch;
};

void validate(const TrainingConfig& config);

// max(1, t/e, e/t); both arguments must be positive.
double qerror(double true_sel, double est_sel);

// Tape form of the q-error of a 1x1 estimate. The estimate is floored at
// est_floor first. At est == true the subgradient is 0.
ad::Variable qerror(const ad::Variable& est, double true_sel, double est_floor);

// A labeled query ready for the query loss: its region and its true
// selectivity floored at one tuple.
struct QueryTarget {
  QueryRegion region;
  double selectivity = 0;
};

std::vector<QueryTarget> make_targets(std::span<const LabeledQuery> queries, const Schema& schema,
                                      std::uint64_t row_count);

// Mean q-error of the DPS estimates over the batch. Noise for each query is
// drawn from rng in batch order.
ad::Variable query_loss(const BoundModel& model, std::span<const QueryTarget> batch, const SamplerConfig& sampler,
                        std::uint64_t row_count, Rng& rng);

// Independent wildcard flags for a data batch, one per (row, column).
ad::Mask draw_wildcards(std::size_t rows, std::size_t cols, double prob, Rng& rng);

// Inputs for training: the rows feeding L^data and the labeled queries
// feeding L^query. row_count is |T| for selectivities, which may exceed the
// rows present (incremental ingestion).
struct TrainingData {
  Schema schema;
  std::uint64_t row_count = 0;
  const EncodedTable* table = nullptr;
  std::vector<LabeledQuery> queries;
};

// Algorithm loop: every step pairs one data batch with one query batch and
// minimizes L = L^data + lambda * L^query.
class Trainer {
 public:
  enum Stream : std::uint64_t { shuffle_stream = 1, wildcard_stream = 2, query_order_stream = 3, noise_stream = 4 };

  Trainer(ResMade& model, const TrainingData& data, TrainingConfig config);

  // One optimizer step on the given table rows and query indices.
  StepRecord step(std::span<const std::size_t> rows, std::span<const std::size_t> queries);

  // Runs config.epochs epochs.
  std::vector<StepRecord> run();

  // Per-step generator for one purpose, so any step can be replayed.
  Rng step_rng(Stream stream, long step) const;

  const std::vector<QueryTarget>& targets() const noexcept { return targets_; }

 private:
  double accumulate_data(std::span<const std::size_t> rows, Rng& rng, std::vector<Matrix>& grads);
  double accumulate_queries(std::span<const std::size_t> queries, Rng& rng, double weight, std::vector<Matrix>& grads);
  void checkpoint(int epoch) const;

  ResMade& model_;
  const TrainingData& data_;
  TrainingConfig config_;
  std::vector<QueryTarget> targets_;
  Adam adam_;
  long step_ = 0;
  int epoch_ = 0;
};

std::vector<StepRecord> hybrid_train(ResMade& model, const TrainingData& data, const TrainingConfig& config);

// Continues data-only training on new rows. row_count is |T| after the rows
// were appended.
std::vector<StepRecord> incremental_ingest_data(ResMade& model, const Schema& schema, const EncodedTable& new_rows,
                                                std::uint64_t row_count, int epochs, TrainingConfig config);

// Query-only refinement on a new workload.
std::vector<StepRecord> incremental_ingest_workload(ResMade& model, const Schema& schema,
                                                    std::span<const LabeledQuery> queries, std::uint64_t row_count,
                                                    int epochs, TrainingConfig config);

void write_step_log(const std::filesystem::path& path, std::span<const StepRecord> steps);

}  // namespace uae

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uae/data.hpp"
#include "uae/model.hpp"
#include "uae/sampler.hpp"
#include "uae/workload.hpp"

namespace uae {

// Worker count for estimation: UAE_THREADS when set, else the hardware count.
int worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Work is split into
// fixed contiguous chunks, so results never depend on the thread count when
// fn writes only to slot i.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct QueryEstimate {
  double selectivity = 0;  // progressive-sampling estimate
  double cardinality = 0;  // selectivity * |T|
  double ms = 0;           // wall-clock latency
};

// Progressive-sampling estimate per query. Query i draws from stream
// make_stream(sampler.seed, i).
std::vector<QueryEstimate> estimate_queries(const ResMade& model, const Schema& schema, std::uint64_t row_count,
                                            std::span<const Query> queries, const SamplerConfig& sampler,
                                            int workers = worker_count());

// q-error with true cardinality floored at one tuple and the estimate at 1/|T|.
double labeled_qerror(std::int64_t true_card, double est_selectivity, std::uint64_t row_count);

// Nearest-rank percentile: sorted[ceil(p/100 * n) - 1].
double nearest_rank(std::span<const double> sorted, double p);

struct ErrorStats {
  std::size_t count = 0;
  double mean = 0;
  double median = 0;
  double p95 = 0;
  double max = 0;
};

ErrorStats summarize(std::vector<double> values);

struct ErrorReport {
  std::string suite;
  ErrorStats qerror;
  ErrorStats latency_ms;
};

// Deterministic parts of a report (q-error statistics only).
std::string format_report_csv(std::span<const ErrorReport> reports);
std::string format_report_text(std::span<const ErrorReport> reports, bool with_latency);

}  // namespace uae

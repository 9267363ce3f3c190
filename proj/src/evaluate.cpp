#include "uae/evaluate.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "uae/denormals.hpp"
#include "uae/error.hpp"
#include "uae/random.hpp"

namespace uae {

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("UAE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ValidationError(fmt::format("UAE_THREADS must be a positive integer, got '{}'", env));
    n = static_cast<int>(std::min<long>(v, 1024));
  }
  return n;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<QueryEstimate> estimate_queries(const ResMade& model, const Schema& schema, std::uint64_t row_count,
                                            std::span<const Query> queries, const SamplerConfig& sampler,
                                            int workers) {
  validate(sampler);
  std::vector<QueryRegion> regions;
  regions.reserve(queries.size());
  for (const auto& q : queries) regions.push_back(to_region(q, schema));
  std::vector<QueryEstimate> out(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const FlushDenormals ftz;
    Rng rng = make_stream(sampler.seed, i);
    const double sel = progressive_sample_estimate(model, regions[i], sampler.samples, rng);
    out[i].selectivity = sel;
    out[i].cardinality = sel * static_cast<double>(row_count);
    out[i].ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  });
  return out;
}

double labeled_qerror(std::int64_t true_card, double est_selectivity, std::uint64_t row_count) {
  const double n = static_cast<double>(row_count);
  const double truth = std::max<double>(static_cast<double>(true_card), 1.0) / n;
  return std::max({1.0, truth / std::max(est_selectivity, 1.0 / n), std::max(est_selectivity, 1.0 / n) / truth});
}

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ContractError("percentile of an empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

ErrorStats summarize(std::vector<double> values) {
  ErrorStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double total = 0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  s.median = nearest_rank(values, 50);
  s.p95 = nearest_rank(values, 95);
  s.max = values.back();
  return s;
}

std::string format_report_csv(std::span<const ErrorReport> reports) {
  std::string out = "suite,count,mean,median,p95,max\n";
  for (const auto& r : reports) {
    out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.suite, r.qerror.count, r.qerror.mean,
                       r.qerror.median, r.qerror.p95, r.qerror.max);
  }
  return out;
}

std::string format_report_text(std::span<const ErrorReport> reports, bool with_latency) {
  std::string out = fmt::format("{:<16} {:>7} {:>10} {:>10} {:>10} {:>10}", "suite", "count", "mean", "median",
                                "95th", "max");
  if (with_latency) out += fmt::format(" {:>12}", "latency ms");
  out += '\n';
  for (const auto& r : reports) {
    out += fmt::format("{:<16} {:>7} {:>10.3f} {:>10.3f} {:>10.3f} {:>10.3f}", r.suite, r.qerror.count,
                       r.qerror.mean, r.qerror.median, r.qerror.p95, r.qerror.max);
    if (with_latency) out += fmt::format(" {:>12.3f}", r.latency_ms.mean);
    out += '\n';
  }
  return out;
}

}  // namespace uae

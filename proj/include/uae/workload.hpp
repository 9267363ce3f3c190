#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uae/data.hpp"
#include "uae/region.hpp"

namespace uae {

enum class Op { eq, ne, lt, le, gt, ge, in };

std::string_view to_string(Op op);
Op parse_op(std::string_view text);

struct Predicate {
  std::string column;
  Op op = Op::eq;
  std::vector<std::string> values;

  bool operator==(const Predicate&) const = default;
};

// Conjunction of predicates; columns without a predicate are wildcards.
struct Query {
  std::vector<Predicate> predicates;

  bool operator==(const Query&) const = default;
};

struct LabeledQuery {
  Query query;
  std::int64_t cardinality = 0;
};

// Allowed-code masks for the query. NULL codes never satisfy a predicate.
// Contradictory predicates yield a region whose empty() is true.
QueryRegion to_region(const Query& query, const Schema& schema);

std::int64_t count_region(const EncodedTable& table, const QueryRegion& region);
std::int64_t exact_cardinality(const EncodedTable& table, const Query& query);

// Stable text form used for deduplication.
std::string canonical_key(const Query& query);

struct WorkloadSpec {
  std::string bounded_column;  // empty: the column with the largest domain
  double target_volume = 0.01;
  // Bounded-range centers are drawn uniformly from this fraction of the codes.
  double center_lo = 0.1;
  double center_hi = 0.9;
  int n_filters_min = 5;
  int train_count = 20000;
  int test_count = 2000;
  std::uint64_t seed = 0;
};

struct Workload {
  std::vector<LabeledQuery> train;
  std::vector<LabeledQuery> test_in_workload;
  std::vector<LabeledQuery> test_random;
};

Workload generate_workload(const EncodedTable& table, const WorkloadSpec& spec);

nlohmann::ordered_json to_json(const LabeledQuery& query);
LabeledQuery labeled_query_from_json(const nlohmann::json& j);

void write_workload(const std::filesystem::path& path, std::span<const LabeledQuery> queries);
std::vector<LabeledQuery> read_workload(const std::filesystem::path& path);

}  // namespace uae

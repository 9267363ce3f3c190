#include "uae/workload.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "uae/error.hpp"
#include "uae/random.hpp"

namespace uae {
namespace {

constexpr Op kFilterOps[] = {Op::eq, Op::lt, Op::le, Op::gt, Op::ge};

CodeMask non_null(const ColumnDictionary& dict) {
  CodeMask m = CodeMask::Constant(dict.domain_size(), true);
  if (dict.has_null()) m[0] = false;
  return m;
}

CodeMask code_range(const ColumnDictionary& dict, Code lo, Code hi_exclusive) {
  CodeMask m = CodeMask::Constant(dict.domain_size(), false);
  const Code first = dict.has_null() ? 1 : 0;
  for (Code k = std::max(lo, first); k < hi_exclusive; ++k) m[k] = true;
  return m;
}

CodeMask predicate_mask(const Predicate& pred, const ColumnDictionary& dict) {
  const auto single = [&]() -> const std::string& {
    if (pred.values.size() != 1) {
      throw ValidationError(fmt::format("predicate on '{}' with '{}' needs exactly one literal", pred.column,
                                        to_string(pred.op)));
    }
    return pred.values.front();
  };
  const Code n = dict.domain_size();
  switch (pred.op) {
    case Op::eq: {
      CodeMask m = CodeMask::Constant(n, false);
      const auto code = dict.find(single());
      if (code && !dict.is_null(*code)) m[*code] = true;
      return m;
    }
    case Op::ne: {
      CodeMask m = non_null(dict);
      const auto code = dict.find(single());
      if (code) m[*code] = false;
      return m;
    }
    case Op::lt:
      return code_range(dict, 0, dict.lower_bound(single(), false));
    case Op::le:
      return code_range(dict, 0, dict.lower_bound(single(), true));
    case Op::gt:
      return code_range(dict, dict.lower_bound(single(), true), n);
    case Op::ge:
      return code_range(dict, dict.lower_bound(single(), false), n);
    case Op::in: {
      if (pred.values.empty()) throw ValidationError(fmt::format("IN predicate on '{}' has no literals", pred.column));
      CodeMask m = CodeMask::Constant(n, false);
      for (const auto& v : pred.values) {
        const auto code = dict.find(v);
        if (code && !dict.is_null(*code)) m[*code] = true;
      }
      return m;
    }
  }
  throw ContractError("unhandled operator");
}

std::size_t column_of(const Schema& schema, std::string_view name) {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name() == name) return i;
  }
  throw ValidationError(fmt::format("unknown column '{}'", name));
}

// JSON literal: a number when the text is the canonical spelling of one.
nlohmann::ordered_json literal_to_json(const std::string& text) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(v) && fmt::format("{}", v) == text) {
    if (v == std::trunc(v) && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
    return v;
  }
  return text;
}

std::string literal_from_json(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return fmt::format("{}", static_cast<double>(j.get<std::int64_t>()));
  if (j.is_number()) return fmt::format("{}", j.get<double>());
  throw ValidationError("query literal must be a string or a number");
}

class Generator {
 public:
  Generator(const EncodedTable& table, const WorkloadSpec& spec) : table_(table), spec_(spec), rng_(spec.seed) {
    const auto& schema = table.schema();
    if (!(spec.target_volume > 0 && spec.target_volume <= 1)) throw ValidationError("target volume must be in (0, 1]");
    if (!(spec.center_lo >= 0 && spec.center_lo < spec.center_hi && spec.center_hi <= 1)) {
      throw ValidationError("center range must satisfy 0 <= lo < hi <= 1");
    }
    if (spec.train_count < 0 || spec.test_count < 0) throw ValidationError("query counts must be non-negative");
    if (table.row_count() == 0) throw ValidationError("cannot generate queries over an empty table");
    if (spec.bounded_column.empty()) {
      bounded_ = 0;
      for (std::size_t c = 1; c < schema.size(); ++c) {
        if (schema[c].domain_size() > schema[bounded_].domain_size()) bounded_ = c;
      }
    } else {
      bounded_ = table.column_index(spec.bounded_column);
    }
    const Code domain = schema[bounded_].domain_size();
    if (static_cast<double>(domain) * spec.target_volume < 1.0 - 1e-9) {
      throw ValidationError(fmt::format("bounded column '{}' has {} values, too few for a target volume of {}",
                                        schema[bounded_].name(), domain, spec.target_volume));
    }
    width_ = std::clamp<Code>(static_cast<Code>(std::lround(spec.target_volume * domain)), 1, domain);
    center_first_ = static_cast<Code>(std::floor(spec.center_lo * domain));
    center_last_ = std::max(center_first_, static_cast<Code>(std::ceil(spec.center_hi * domain)) - 1);
    center_last_ = std::min(center_last_, domain - 1);

    // Rows grouped by bounded-column code.
    code_start_.assign(static_cast<std::size_t>(domain) + 1, 0);
    for (std::size_t r = 0; r < table.row_count(); ++r) ++code_start_[static_cast<std::size_t>(table.code(r, bounded_)) + 1];
    std::partial_sum(code_start_.begin(), code_start_.end(), code_start_.begin());
    rows_by_code_.resize(table.row_count());
    auto fill = code_start_;
    for (std::size_t r = 0; r < table.row_count(); ++r) rows_by_code_[fill[static_cast<std::size_t>(table.code(r, bounded_))]++] = r;
  }

  Workload run() {
    Workload out;
    std::unordered_set<std::string> train_keys;
    out.train = draw(spec_.train_count, true, nullptr, true);
    for (const auto& q : out.train) train_keys.insert(canonical_key(q.query));
    out.test_in_workload = draw(spec_.test_count, true, &train_keys, true);
    out.test_random = draw(spec_.test_count, false, &train_keys, false);
    return out;
  }

 private:
  std::vector<LabeledQuery> draw(int count, bool bounded, const std::unordered_set<std::string>* exclude,
                                 bool require_match) {
    std::vector<LabeledQuery> out;
    const std::size_t max_attempts = 1000 + 200 * static_cast<std::size_t>(count);
    std::size_t attempts = 0;
    while (static_cast<int>(out.size()) < count) {
      if (++attempts > max_attempts) {
        throw ValidationError("workload spec is infeasible: too many rejected queries");
      }
      Query q = bounded ? bounded_query() : random_query();
      if (exclude && exclude->count(canonical_key(q))) continue;
      const auto card = exact_cardinality(table_, q);
      if (require_match && card == 0) continue;
      out.push_back({std::move(q), card});
    }
    return out;
  }

  void add_filters(std::vector<std::size_t> candidates, std::size_t row, std::vector<Predicate>& preds) {
    const auto& schema = table_.schema();
    if (candidates.empty()) return;
    const std::size_t hi = candidates.size();
    const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(std::max(spec_.n_filters_min, 1)), hi);
    const std::size_t nf = lo + uniform_index(rng_, hi - lo + 1);
    for (std::size_t i = 0; i < nf; ++i) {
      const std::size_t j = i + uniform_index(rng_, candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
      const std::size_t col = candidates[i];
      const Op op = kFilterOps[uniform_index(rng_, std::size(kFilterOps))];
      const Code code = table_.code(row, col);
      if (schema[col].is_null(code)) continue;
      preds.push_back({schema[col].name(), op, {schema[col].value(code)}});
    }
  }

  Query bounded_query() {
    const auto& dict = table_.schema()[bounded_];
    const Code domain = dict.domain_size();
    const Code center = center_first_ + static_cast<Code>(uniform_index(rng_, static_cast<std::uint64_t>(center_last_ - center_first_ + 1)));
    const Code start = std::clamp<Code>(center - width_ / 2, 0, domain - width_);
    const Code end = start + width_ - 1;

    const std::size_t first = code_start_[static_cast<std::size_t>(start)];
    const std::size_t last = code_start_[static_cast<std::size_t>(end) + 1];
    const std::size_t row = rows_by_code_[first + uniform_index(rng_, last - first)];

    std::vector<Predicate> preds;
    if (width_ < domain) {
      if (start == end) {
        preds.push_back({dict.name(), Op::eq, {dict.value(start)}});
      } else {
        preds.push_back({dict.name(), Op::ge, {dict.value(start)}});
        preds.push_back({dict.name(), Op::le, {dict.value(end)}});
      }
    }
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < table_.num_columns(); ++c) {
      if (c != bounded_) candidates.push_back(c);
    }
    add_filters(std::move(candidates), row, preds);
    return finish(std::move(preds));
  }

  Query random_query() {
    const std::size_t row = uniform_index(rng_, table_.row_count());
    std::vector<std::size_t> candidates(table_.num_columns());
    std::iota(candidates.begin(), candidates.end(), 0);
    std::vector<Predicate> preds;
    add_filters(std::move(candidates), row, preds);
    return finish(std::move(preds));
  }

  Query finish(std::vector<Predicate> preds) const {
    const auto& schema = table_.schema();
    std::stable_sort(preds.begin(), preds.end(), [&](const Predicate& a, const Predicate& b) {
      return column_of(schema, a.column) < column_of(schema, b.column);
    });
    return Query{std::move(preds)};
  }

  const EncodedTable& table_;
  const WorkloadSpec& spec_;
  Rng rng_;
  std::size_t bounded_ = 0;
  Code width_ = 1;
  Code center_first_ = 0;
  Code center_last_ = 0;
  std::vector<std::size_t> code_start_;
  std::vector<std::size_t> rows_by_code_;
};

}  // namespace

std::string_view to_string(Op op) {
  switch (op) {
    case Op::eq: return "=";
    case Op::ne: return "!=";
    case Op::lt: return "<";
    case Op::le: return "<=";
    case Op::gt: return ">";
    case Op::ge: return ">=";
    case Op::in: return "IN";
  }
  return "?";
}

Op parse_op(std::string_view text) {
  if (text == "=" || text == "==") return Op::eq;
  if (text == "!=" || text == "<>") return Op::ne;
  if (text == "<") return Op::lt;
  if (text == "<=") return Op::le;
  if (text == ">") return Op::gt;
  if (text == ">=") return Op::ge;
  if (text == "IN" || text == "in") return Op::in;
  throw ValidationError(fmt::format("unknown operator '{}'", text));
}

QueryRegion to_region(const Query& query, const Schema& schema) {
  std::vector<Code> domains;
  for (const auto& col : schema) domains.push_back(col.domain_size());
  QueryRegion region = QueryRegion::full(domains, true);
  for (const auto& pred : query.predicates) {
    const std::size_t col = column_of(schema, pred.column);
    region.allowed[col] = region.allowed[col] && predicate_mask(pred, schema[col]);
    region.wildcard[col] = false;
  }
  return region;
}

std::int64_t count_region(const EncodedTable& table, const QueryRegion& region) {
  if (region.num_columns() != table.num_columns()) throw ContractError("region does not match the table");
  if (region.empty()) return 0;
  std::vector<std::size_t> checks;
  for (std::size_t c = 0; c < region.num_columns(); ++c) {
    if (!region.is_full(c)) checks.push_back(c);
  }
  std::sort(checks.begin(), checks.end(),
            [&](std::size_t a, std::size_t b) { return region.allowed[a].count() < region.allowed[b].count(); });
  const std::size_t n = table.num_columns();
  const Code* codes = table.codes().data();
  std::int64_t count = 0;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    const Code* row = codes + r * n;
    bool match = true;
    for (std::size_t c : checks) {
      if (!region.allowed[c][row[c]]) {
        match = false;
        break;
      }
    }
    count += match ? 1 : 0;
  }
  return count;
}

std::int64_t exact_cardinality(const EncodedTable& table, const Query& query) {
  return count_region(table, to_region(query, table.schema()));
}

std::string canonical_key(const Query& query) {
  std::string key;
  for (const auto& p : query.predicates) {
    key += p.column;
    key += '\x1f';
    key += to_string(p.op);
    for (const auto& v : p.values) {
      key += '\x1f';
      key += v;
    }
    key += '\x1e';
  }
  return key;
}

Workload generate_workload(const EncodedTable& table, const WorkloadSpec& spec) {
  return Generator(table, spec).run();
}

nlohmann::ordered_json to_json(const LabeledQuery& query) {
  auto preds = nlohmann::ordered_json::array();
  for (const auto& p : query.query.predicates) {
    auto vals = nlohmann::ordered_json::array();
    for (const auto& v : p.values) vals.push_back(literal_to_json(v));
    preds.push_back({{"col", p.column}, {"op", to_string(p.op)}, {"vals", std::move(vals)}});
  }
  nlohmann::ordered_json j;
  j["predicates"] = std::move(preds);
  j["card"] = query.cardinality;
  return j;
}

LabeledQuery labeled_query_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("predicates") || !j["predicates"].is_array()) {
    throw ValidationError("query object needs a 'predicates' array");
  }
  LabeledQuery out;
  for (const auto& p : j["predicates"]) {
    Predicate pred;
    pred.column = p.at("col").get<std::string>();
    pred.op = parse_op(p.at("op").get<std::string>());
    const auto& vals = p.at("vals");
    if (vals.is_array()) {
      for (const auto& v : vals) pred.values.push_back(literal_from_json(v));
    } else {
      pred.values.push_back(literal_from_json(vals));
    }
    out.query.predicates.push_back(std::move(pred));
  }
  if (j.contains("card")) {
    out.cardinality = j["card"].get<std::int64_t>();
    if (out.cardinality < 0) throw ValidationError("negative cardinality label");
  }
  return out;
}

void write_workload(const std::filesystem::path& path, std::span<const LabeledQuery> queries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& q : queries) out << to_json(q).dump() << '\n';
}

std::vector<LabeledQuery> read_workload(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::vector<LabeledQuery> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(labeled_query_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

}  // namespace uae

#include "uae/data.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "uae/binary_io.hpp"
#include "uae/error.hpp"

namespace uae {
namespace {

constexpr std::string_view kTableMagic = "UAET";
constexpr std::uint32_t kTableVersion = 1;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view raw) {
  const auto s = trim(raw);
  if (s.empty()) return std::nullopt;
  double v = 0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  if (v == 0) v = 0;  // fold -0
  return fmt::format("{}", v);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

ColumnDictionary::ColumnDictionary(std::string name, ColumnKind kind, const std::vector<std::string>& raw_values)
    : name_(std::move(name)), kind_(kind) {
  if (kind_ == ColumnKind::numeric) {
    std::set<double> distinct;
    for (const auto& raw : raw_values) {
      if (raw.empty()) {
        has_null_ = true;
        continue;
      }
      const auto v = parse_number(raw);
      if (!v) throw ValidationError(fmt::format("column '{}': '{}' is not numeric", name_, raw));
      distinct.insert(*v == 0 ? 0.0 : *v);
    }
    if (has_null_) {
      values_.emplace_back();
      numbers_.push_back(-std::numeric_limits<double>::infinity());
    }
    for (double v : distinct) {
      values_.push_back(format_number(v));
      numbers_.push_back(v);
    }
  } else {
    std::set<std::string> distinct;
    for (const auto& raw : raw_values) {
      if (raw.empty()) {
        has_null_ = true;
      } else {
        distinct.insert(raw);
      }
    }
    if (has_null_) values_.emplace_back();
    values_.insert(values_.end(), distinct.begin(), distinct.end());
  }
}

ColumnDictionary ColumnDictionary::from_sorted(std::string name, ColumnKind kind, std::vector<std::string> values) {
  ColumnDictionary dict;
  dict.name_ = std::move(name);
  dict.kind_ = kind;
  dict.has_null_ = !values.empty() && values.front().empty();
  if (kind == ColumnKind::numeric) {
    for (const auto& v : values) {
      if (v.empty()) {
        dict.numbers_.push_back(-std::numeric_limits<double>::infinity());
      } else {
        const auto n = parse_number(v);
        if (!n) throw ValidationError(fmt::format("column '{}': stored value '{}' is not numeric", dict.name_, v));
        dict.numbers_.push_back(*n);
      }
    }
  }
  dict.values_ = std::move(values);
  for (std::size_t i = 1; i < dict.values_.size(); ++i) {
    const bool ordered = kind == ColumnKind::numeric ? dict.numbers_[i - 1] < dict.numbers_[i]
                                                     : dict.values_[i - 1] < dict.values_[i];
    if (!ordered) throw ValidationError(fmt::format("column '{}': stored dictionary is not sorted", dict.name_));
  }
  return dict;
}

const std::string& ColumnDictionary::value(Code code) const {
  if (code < 0 || code >= domain_size()) {
    throw ValidationError(fmt::format("column '{}': code {} outside [0, {})", name_, code, domain_size()));
  }
  return values_[static_cast<std::size_t>(code)];
}

std::string ColumnDictionary::canonical(std::string_view raw) const {
  if (raw.empty()) return {};
  if (kind_ == ColumnKind::categorical) return std::string(raw);
  const auto v = parse_number(raw);
  if (!v) throw ValidationError(fmt::format("column '{}': literal '{}' is not numeric", name_, raw));
  return format_number(*v);
}

int ColumnDictionary::compare(Code code, std::string_view literal) const {
  const auto i = static_cast<std::size_t>(code);
  if (kind_ == ColumnKind::numeric) {
    const double lit = *parse_number(literal);
    return numbers_[i] < lit ? -1 : (numbers_[i] > lit ? 1 : 0);
  }
  const int c = values_[i].compare(literal);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

Code ColumnDictionary::lower_bound(std::string_view literal, bool strict) const {
  const std::string lit = canonical(literal);
  Code lo = has_null_ ? 1 : 0;
  Code hi = domain_size();
  while (lo < hi) {
    const Code mid = lo + (hi - lo) / 2;
    const int c = compare(mid, lit);
    if (c < 0 || (strict && c == 0)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::optional<Code> ColumnDictionary::find(std::string_view raw) const {
  if (raw.empty()) return has_null_ ? std::optional<Code>(0) : std::nullopt;
  std::string lit;
  try {
    lit = canonical(raw);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  const Code at = lower_bound(lit);
  if (at < domain_size() && compare(at, lit) == 0) return at;
  return std::nullopt;
}

Code ColumnDictionary::code_of(std::string_view raw) const {
  const auto code = find(raw);
  if (!code) throw ValidationError(fmt::format("column '{}': value '{}' is not in the dictionary", name_, raw));
  return *code;
}

EncodedTable::EncodedTable(Schema schema, std::vector<Code> codes) : schema_(std::move(schema)), codes_(std::move(codes)) {
  const std::size_t n = schema_.size();
  if (n == 0) throw ValidationError("table has no columns");
  if (codes_.size() % n != 0) throw ContractError("code matrix is not rectangular");
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    const Code c = codes_[i];
    if (c < 0 || c >= schema_[i % n].domain_size()) {
      throw ValidationError(fmt::format("row {}: code {} outside the domain of column '{}'", i / n, c,
                                        schema_[i % n].name()));
    }
  }
}

std::size_t EncodedTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name() == name) return i;
  }
  throw ValidationError(fmt::format("unknown column '{}'", name));
}

CsvRecords parse_csv(std::string_view text, const CsvOptions& options) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_started = false;
  const char delim = options.delimiter;

  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    const bool blank = row.size() == 1 && row.front().empty() && !row_started;
    if (!blank) lines.push_back(std::move(row));
    row.clear();
    row_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
      row_started = true;
    } else if (ch == delim) {
      row.push_back(std::move(field));
      field.clear();
      row_started = true;
    } else if (ch == '\n') {
      end_row();
    } else if (ch == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_row();
    } else {
      field += ch;
      row_started = true;
    }
  }
  if (quoted) throw ValidationError("unterminated quoted field at end of input");
  if (!field.empty() || !row.empty() || row_started) end_row();

  CsvRecords out;
  std::size_t first_data = 0;
  if (options.header) {
    if (lines.empty()) throw ValidationError("CSV input is empty");
    out.header = std::move(lines.front());
    first_data = 1;
  }
  const std::size_t width = options.header ? out.header.size() : (lines.empty() ? 0 : lines.front().size());
  for (std::size_t i = first_data; i < lines.size(); ++i) {
    if (lines[i].size() != width) {
      throw ValidationError(fmt::format("ragged CSV: data row {} has {} fields, expected {}", i - first_data + 1,
                                        lines[i].size(), width));
    }
    out.rows.push_back(std::move(lines[i]));
  }
  if (!options.header) {
    for (std::size_t c = 0; c < width; ++c) out.header.push_back(fmt::format("col{}", c));
  }
  return out;
}

CsvRecords read_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

EncodedTable ingest_records(const CsvRecords& records, const CsvOptions& options) {
  if (records.rows.empty()) throw ValidationError("table is empty");
  const std::size_t ncols = records.header.size();
  if (ncols == 0) throw ValidationError("table has no columns");

  std::vector<bool> numeric(ncols, false);
  if (options.numeric_columns) {
    for (const auto& name : *options.numeric_columns) {
      const auto it = std::find(records.header.begin(), records.header.end(), name);
      if (it == records.header.end()) throw ValidationError(fmt::format("unknown numeric column '{}'", name));
      numeric[static_cast<std::size_t>(it - records.header.begin())] = true;
    }
  } else {
    for (std::size_t c = 0; c < ncols; ++c) {
      bool any = false;
      bool all = true;
      for (const auto& row : records.rows) {
        if (row[c].empty()) continue;
        any = true;
        if (!parse_number(row[c])) {
          all = false;
          break;
        }
      }
      numeric[c] = any && all;
    }
  }

  Schema schema;
  std::vector<std::string> column_values(records.rows.size());
  for (std::size_t c = 0; c < ncols; ++c) {
    for (std::size_t r = 0; r < records.rows.size(); ++r) column_values[r] = records.rows[r][c];
    schema.emplace_back(records.header[c], numeric[c] ? ColumnKind::numeric : ColumnKind::categorical, column_values);
  }
  return EncodedTable(schema, encode_records(schema, records.rows));
}

EncodedTable ingest_csv(const std::filesystem::path& path, const CsvOptions& options) {
  return ingest_records(read_csv(path, options), options);
}

std::vector<Code> encode_records(const Schema& schema, const std::vector<std::vector<std::string>>& rows) {
  std::vector<Code> codes;
  codes.reserve(rows.size() * schema.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size()) {
      throw ValidationError(fmt::format("row {} has {} fields, expected {}", r + 1, rows[r].size(), schema.size()));
    }
    for (std::size_t c = 0; c < schema.size(); ++c) codes.push_back(schema[c].code_of(rows[r][c]));
  }
  return codes;
}

void save_table(const EncodedTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  io::write_magic(out, kTableMagic);
  io::write_u32(out, kTableVersion);
  io::write_u32(out, static_cast<std::uint32_t>(table.num_columns()));
  io::write_u64(out, table.row_count());
  for (const auto& col : table.schema()) {
    io::write_string(out, col.name());
    io::write_u8(out, static_cast<std::uint8_t>(col.kind()));
    io::write_u32(out, static_cast<std::uint32_t>(col.domain_size()));
    for (const auto& v : col.values()) io::write_string(out, v);
  }
  for (Code c : table.codes()) io::write_u32(out, static_cast<std::uint32_t>(c));
  if (!out) throw ValidationError(fmt::format("failed writing '{}'", path.string()));
}

EncodedTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  io::expect_magic(in, kTableMagic, "table");
  if (const auto version = io::read_u32(in); version != kTableVersion) {
    throw ValidationError(fmt::format("unsupported table version {}", version));
  }
  const auto ncols = io::read_u32(in);
  const auto nrows = io::read_u64(in);
  Schema schema;
  for (std::uint32_t c = 0; c < ncols; ++c) {
    auto name = io::read_string(in);
    const auto kind = static_cast<ColumnKind>(io::read_u8(in));
    const auto domain = io::read_u32(in);
    std::vector<std::string> values(domain);
    for (auto& v : values) v = io::read_string(in);
    schema.push_back(ColumnDictionary::from_sorted(std::move(name), kind, std::move(values)));
  }
  std::vector<Code> codes(nrows * ncols);
  for (auto& c : codes) c = static_cast<Code>(io::read_u32(in));
  return EncodedTable(std::move(schema), std::move(codes));
}

nlohmann::ordered_json schema_summary(const Schema& schema) {
  auto columns = nlohmann::ordered_json::array();
  for (const auto& col : schema) {
    columns.push_back({{"name", col.name()},
                       {"kind", to_string(col.kind())},
                       {"domain_size", col.domain_size()},
                       {"bit_width", bit_width(col.domain_size())}});
  }
  return columns;
}

int bit_width(Code domain_size) {
  int w = 0;
  while ((Code{1} << w) < domain_size) ++w;
  return std::max(w, 1);
}

RowVector binary_encode(Code code, int width) {
  if (width < 1 || width > 30 || code < 0 || code >= (Code{1} << width)) {
    throw ValidationError(fmt::format("code {} does not fit in {} bits", code, width));
  }
  RowVector bits(width);
  for (int b = 0; b < width; ++b) bits[b] = static_cast<double>((code >> (width - 1 - b)) & 1);
  return bits;
}

Code binary_decode(const RowVector& bits) {
  Code code = 0;
  for (Eigen::Index b = 0; b < bits.size(); ++b) code = (code << 1) | (bits[b] > 0.5 ? 1 : 0);
  return code;
}

InputEncoding::InputEncoding(std::vector<Code> domain_sizes) : domains_(std::move(domain_sizes)) {
  for (Code d : domains_) {
    if (d < 1) throw ValidationError("column with an empty domain");
    const int w = bit_width(d);
    offsets_.push_back(total_);
    widths_.push_back(w);
    total_ += w;
    Matrix table(d, w);
    for (Code c = 0; c < d; ++c) table.row(c) = binary_encode(c, w);
    bits_.push_back(std::move(table));
  }
}

InputEncoding::InputEncoding(const Schema& schema)
    : InputEncoding([&] {
        std::vector<Code> d;
        for (const auto& col : schema) d.push_back(col.domain_size());
        return d;
      }()) {}

RowVector InputEncoding::wildcard_vector(std::size_t col) const {
  return RowVector::Constant(widths_.at(col), -1.0);
}

RowVector InputEncoding::expected_encoding(std::size_t col, const RowVector& dist) const {
  if (dist.size() != domains_.at(col)) {
    throw ContractError(fmt::format("distribution of length {} for a domain of {}", dist.size(), domains_[col]));
  }
  return dist * bits_[col];
}

RowVector InputEncoding::all_wildcards() const { return RowVector::Constant(total_, -1.0); }

Matrix InputEncoding::encode(std::span<const Code> codes, std::size_t rows, const ad::Mask* wildcard) const {
  const std::size_t n = num_columns();
  if (codes.size() != rows * n) throw ContractError("encode: code buffer size mismatch");
  Matrix out(static_cast<Eigen::Index>(rows), total_);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto ri = static_cast<Eigen::Index>(r);
      if (wildcard && (*wildcard)(ri, static_cast<Eigen::Index>(c))) {
        out.row(ri).segment(offsets_[c], widths_[c]).setConstant(-1.0);
      } else {
        const Code code = codes[r * n + c];
        if (code < 0 || code >= domains_[c]) throw ValidationError(fmt::format("code {} outside column {}", code, c));
        out.row(ri).segment(offsets_[c], widths_[c]) = bits_[c].row(code);
      }
    }
  }
  return out;
}

}  // namespace uae

#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uae/autodiff.hpp"

namespace uae {

using Code = std::int32_t;
using Matrix = ad::Matrixd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class ColumnKind : std::uint8_t { categorical = 0, numeric = 1 };

std::string_view to_string(ColumnKind kind);

// Sorted distinct values of one column and the value <-> code bijection.
// Codes follow the natural order of the values: lexicographic for categorical
// columns, numeric for numeric ones. An empty field is NULL and, when
// present, takes code 0.
class ColumnDictionary {
 public:
  ColumnDictionary() = default;

  // Builds the dictionary from raw field texts (duplicates allowed).
  ColumnDictionary(std::string name, ColumnKind kind, const std::vector<std::string>& raw_values);

  // Rebuilds from already-sorted distinct canonical texts (persistence path).
  static ColumnDictionary from_sorted(std::string name, ColumnKind kind, std::vector<std::string> values);

  const std::string& name() const noexcept { return name_; }
  ColumnKind kind() const noexcept { return kind_; }
  Code domain_size() const noexcept { return static_cast<Code>(values_.size()); }
  bool has_null() const noexcept { return has_null_; }
  bool is_null(Code code) const noexcept { return has_null_ && code == 0; }

  // Canonical text of a code ("" for NULL).
  const std::string& value(Code code) const;
  const std::vector<std::string>& values() const noexcept { return values_; }

  std::optional<Code> find(std::string_view raw) const;
  Code code_of(std::string_view raw) const;  // throws ValidationError when absent

  // First non-NULL code whose value is >= literal (> literal when strict);
  // domain_size() when none.
  Code lower_bound(std::string_view literal, bool strict = false) const;

  // Canonical form of a raw field under this column's kind.
  std::string canonical(std::string_view raw) const;

 private:
  int compare(Code code, std::string_view canonical_literal) const;

  std::string name_;
  ColumnKind kind_ = ColumnKind::categorical;
  bool has_null_ = false;
  std::vector<std::string> values_;
  std::vector<double> numbers_;  // numeric columns only, parallel to values_
};

using Schema = std::vector<ColumnDictionary>;

// Dictionary-encoded relation. Codes are stored row-major.
class EncodedTable {
 public:
  EncodedTable() = default;
  EncodedTable(Schema schema, std::vector<Code> codes);

  const Schema& schema() const noexcept { return schema_; }
  std::size_t num_columns() const noexcept { return schema_.size(); }
  std::size_t row_count() const noexcept { return num_columns() ? codes_.size() / num_columns() : 0; }

  Code code(std::size_t row, std::size_t col) const { return codes_[row * num_columns() + col]; }
  std::span<const Code> row(std::size_t r) const { return {codes_.data() + r * num_columns(), num_columns()}; }
  const std::vector<Code>& codes() const noexcept { return codes_; }

  std::size_t column_index(std::string_view name) const;  // throws ValidationError

 private:
  Schema schema_;
  std::vector<Code> codes_;
};

struct CsvOptions {
  bool header = true;
  char delimiter = ',';
  // Columns to treat as numeric. When unset, a column is numeric iff every
  // non-empty field parses as a number.
  std::optional<std::vector<std::string>> numeric_columns;
};

struct CsvRecords {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180 style reader: quoted fields, doubled quotes, CRLF tolerated.
CsvRecords read_csv(const std::filesystem::path& path, const CsvOptions& options);
CsvRecords parse_csv(std::string_view text, const CsvOptions& options);

EncodedTable ingest_csv(const std::filesystem::path& path, const CsvOptions& options = {});
EncodedTable ingest_records(const CsvRecords& records, const CsvOptions& options = {});

// Encodes raw rows against existing dictionaries; unseen values are an error.
std::vector<Code> encode_records(const Schema& schema, const std::vector<std::vector<std::string>>& rows);

void save_table(const EncodedTable& table, const std::filesystem::path& path);
EncodedTable load_table(const std::filesystem::path& path);

nlohmann::ordered_json schema_summary(const Schema& schema);

int bit_width(Code domain_size);

// Fixed-width big-endian 0/1 vector.
RowVector binary_encode(Code code, int width);
Code binary_decode(const RowVector& bits);

// Layout of the model input: each column's binary code occupies a contiguous
// slice. Unqueried columns carry the all(-1) wildcard token instead.
class InputEncoding {
 public:
  InputEncoding() = default;
  explicit InputEncoding(std::vector<Code> domain_sizes);
  explicit InputEncoding(const Schema& schema);

  std::size_t num_columns() const noexcept { return domains_.size(); }
  Code domain_size(std::size_t col) const { return domains_[col]; }
  const std::vector<Code>& domain_sizes() const noexcept { return domains_; }
  int width(std::size_t col) const { return widths_[col]; }
  int offset(std::size_t col) const { return offsets_[col]; }
  int total_width() const noexcept { return total_; }

  // |A_i| x w_i matrix whose row c is binary_encode(c).
  const Matrix& bit_table(std::size_t col) const { return bits_[col]; }
  RowVector wildcard_vector(std::size_t col) const;

  // Probability-weighted average of the column's bit vectors.
  RowVector expected_encoding(std::size_t col, const RowVector& dist) const;

  // One input row per tuple; columns flagged in `wildcard` (rows x cols,
  // optional) get the wildcard token.
  Matrix encode(std::span<const Code> codes, std::size_t rows, const ad::Mask* wildcard = nullptr) const;

  // Input row with every column set to its wildcard token.
  RowVector all_wildcards() const;

 private:
  std::vector<Code> domains_;
  std::vector<int> widths_;
  std::vector<int> offsets_;
  std::vector<Matrix> bits_;
  int total_ = 0;
};

}  // namespace uae

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace limi {

enum class ColumnKind { Numeric, Categorical };

/// One attribute of the tabular input domain.
///
/// Values are stored as doubles: numeric columns hold the value itself, categorical
/// columns hold the index into `categories`. Numeric columns are integer-stepped unless
/// `integer` is false, in which case they can be sampled but not enumerated.
struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  double lo = 0.0;
  double hi = 0.0;
  bool integer = true;
  std::vector<std::string> categories;
  bool is_protected = false;
  std::vector<double> privileged;

  static ColumnSpec numeric(std::string name, double lo, double hi, bool integer = true);
  static ColumnSpec categorical(std::string name, std::vector<std::string> categories);

  bool is_categorical() const { return kind == ColumnKind::Categorical; }

  /// Number of discrete values; 0 for real-valued numeric columns.
  std::size_t cardinality() const;

  /// The k-th discrete value (category index or lo + k).
  double value_at(std::size_t k) const;

  bool contains(double v) const;
  bool is_privileged(double v) const;

  std::string format(double v) const;
  /// Parses a textual cell; throws OutOfDomainValue when it is not in the domain.
  double parse(std::string_view text) const;

  void validate() const;

  bool operator==(const ColumnSpec&) const = default;
};

class Schema {
 public:
  Schema() = default;
  Schema(std::vector<ColumnSpec> columns, std::string label_name, int favorable_label = 1);

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
  std::size_t size() const { return columns_.size(); }
  const std::string& label_name() const { return label_name_; }
  int favorable_label() const { return favorable_label_; }

  /// Index of the named column; throws MissingColumn.
  std::size_t index_of(std::string_view name) const;
  std::vector<std::size_t> protected_indices() const;

  /// Copy of this schema where exactly the named columns are protected.
  Schema with_protected(const std::vector<std::string>& names) const;

  void validate() const;

  nlohmann::json to_json() const;
  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::filesystem::path& path);

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::string label_name_;
  int favorable_label_ = 1;
};

struct Row {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  auto operator<=>(const Row&) const = default;
};

struct RowHash {
  std::size_t operator()(const Row& row) const noexcept;
};

/// Throws OutOfDomainValue naming the first offending column.
void validate_row(const Schema& schema, const Row& row);
bool is_valid_row(const Schema& schema, const Row& row);

struct Dataset {
  Schema schema;
  std::vector<Row> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  void validate() const;
  /// Column i of every row.
  std::vector<double> column(std::size_t i) const;
};

Dataset concat(const Dataset& a, const Dataset& b);

struct ColumnRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Numeric view of a row under the ordinal / min-max encoding.
struct FeatureVector {
  std::vector<double> entries;
  std::vector<ColumnRange> encoding_map;
};

FeatureVector encode(const Schema& schema, const Row& row);
/// Allocation-free variant; `out` must have schema.size() entries.
void encode_into(const Schema& schema, const Row& row, std::span<double> out);
double encode_value(const ColumnSpec& column, double v);

/// Every row reachable by changing protected columns only, excluding `row` itself,
/// in lexicographic order over the protected columns (schema order).
std::vector<Row> protected_variants(const Schema& schema, const Row& row);

std::vector<Row> sample_uniform(const Schema& schema, std::size_t n, std::uint64_t seed);

/// Continues the sequence `sample_uniform` produces for the same seed, in chunks.
class UniformRowStream {
 public:
  UniformRowStream(Schema schema, std::uint64_t seed);
  std::vector<Row> next(std::size_t n);

 private:
  Schema schema_;
  std::mt19937_64 rng_;
};

Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
void write_csv(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace limi

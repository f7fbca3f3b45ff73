#include "limi/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "limi/error.hpp"

namespace limi {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::nearbyint(v) && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

ColumnSpec ColumnSpec::numeric(std::string name, double lo, double hi, bool integer) {
  ColumnSpec c;
  c.name = std::move(name);
  c.kind = ColumnKind::Numeric;
  c.lo = lo;
  c.hi = hi;
  c.integer = integer;
  return c;
}

ColumnSpec ColumnSpec::categorical(std::string name, std::vector<std::string> categories) {
  ColumnSpec c;
  c.name = std::move(name);
  c.kind = ColumnKind::Categorical;
  c.categories = std::move(categories);
  c.lo = 0.0;
  c.hi = c.categories.empty() ? 0.0 : static_cast<double>(c.categories.size() - 1);
  c.integer = true;
  return c;
}

std::size_t ColumnSpec::cardinality() const {
  if (is_categorical()) return categories.size();
  if (!integer) return 0;
  return static_cast<std::size_t>(std::floor(hi) - std::ceil(lo)) + 1;
}

double ColumnSpec::value_at(std::size_t k) const {
  if (is_categorical()) return static_cast<double>(k);
  return std::ceil(lo) + static_cast<double>(k);
}

bool ColumnSpec::contains(double v) const {
  if (!std::isfinite(v)) return false;
  if (is_categorical()) {
    return v >= 0.0 && v == std::nearbyint(v) && v < static_cast<double>(categories.size());
  }
  if (v < lo || v > hi) return false;
  return !integer || v == std::nearbyint(v);
}

bool ColumnSpec::is_privileged(double v) const {
  return std::find(privileged.begin(), privileged.end(), v) != privileged.end();
}

std::string ColumnSpec::format(double v) const {
  if (is_categorical()) return categories.at(static_cast<std::size_t>(v));
  return format_number(v);
}

double ColumnSpec::parse(std::string_view text) const {
  text = trim(text);
  if (is_categorical()) {
    const auto it = std::find(categories.begin(), categories.end(), text);
    if (it == categories.end()) {
      throw Error(ErrorCode::OutOfDomainValue, "column '" + name + "': '" + std::string(text) + "' not in domain");
    }
    return static_cast<double>(it - categories.begin());
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !contains(v)) {
    throw Error(ErrorCode::OutOfDomainValue, "column '" + name + "': '" + std::string(text) + "' not in domain");
  }
  return v;
}

void ColumnSpec::validate() const {
  if (name.empty()) throw Error(ErrorCode::InvalidSchema, "column with empty name");
  if (is_categorical()) {
    if (categories.empty()) throw Error(ErrorCode::InvalidSchema, "column '" + name + "' has no categories");
    std::set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size()) {
      throw Error(ErrorCode::InvalidSchema, "column '" + name + "' has duplicate categories");
    }
  } else {
    if (!(lo <= hi)) throw Error(ErrorCode::InvalidSchema, "column '" + name + "' has empty interval");
    if (integer && std::ceil(lo) > std::floor(hi)) {
      throw Error(ErrorCode::InvalidSchema, "column '" + name + "' has no integer in its interval");
    }
  }
  for (double p : privileged) {
    if (!contains(p)) throw Error(ErrorCode::InvalidSchema, "column '" + name + "' privileged value outside domain");
  }
  if (is_protected && !is_categorical() && !integer) {
    throw Error(ErrorCode::InvalidSchema, "protected column '" + name + "' must be discrete");
  }
}

Schema::Schema(std::vector<ColumnSpec> columns, std::string label_name, int favorable_label)
    : columns_(std::move(columns)), label_name_(std::move(label_name)), favorable_label_(favorable_label) {
  validate();
}

std::size_t Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  throw Error(ErrorCode::MissingColumn, "no column named '" + std::string(name) + "'");
}

std::vector<std::size_t> Schema::protected_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].is_protected) out.push_back(i);
  }
  return out;
}

Schema Schema::with_protected(const std::vector<std::string>& names) const {
  Schema copy = *this;
  for (auto& c : copy.columns_) c.is_protected = false;
  for (const auto& n : names) copy.columns_[copy.index_of(n)].is_protected = true;
  copy.validate();
  return copy;
}

void Schema::validate() const {
  if (columns_.empty()) throw Error(ErrorCode::InvalidSchema, "schema has no columns");
  std::set<std::string> names;
  bool any_protected = false;
  for (const auto& c : columns_) {
    c.validate();
    if (!names.insert(c.name).second) throw Error(ErrorCode::InvalidSchema, "duplicate column '" + c.name + "'");
    any_protected = any_protected || c.is_protected;
  }
  if (!any_protected) throw Error(ErrorCode::InvalidSchema, "schema needs at least one protected column");
  if (names.count(label_name_) != 0) {
    throw Error(ErrorCode::InvalidSchema, "label '" + label_name_ + "' listed among feature columns");
  }
  if (favorable_label_ != 0 && favorable_label_ != 1) {
    throw Error(ErrorCode::InvalidSchema, "favorable_label must be 0 or 1");
  }
}

nlohmann::json Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json jc;
    jc["name"] = c.name;
    if (c.is_categorical()) {
      jc["kind"] = "categorical";
      jc["domain"] = c.categories;
      nlohmann::json priv = nlohmann::json::array();
      for (double p : c.privileged) priv.push_back(c.categories.at(static_cast<std::size_t>(p)));
      jc["privileged"] = priv;
    } else {
      jc["kind"] = "numeric";
      jc["domain"] = {c.lo, c.hi};
      jc["integer"] = c.integer;
      jc["privileged"] = c.privileged;
    }
    jc["protected"] = c.is_protected;
    cols.push_back(jc);
  }
  return {{"columns", cols}, {"label", label_name_}, {"favorable_label", favorable_label_}};
}

Schema Schema::from_json(const nlohmann::json& j) {
  try {
    std::vector<ColumnSpec> cols;
    for (const auto& jc : j.at("columns")) {
      const auto kind = jc.at("kind").get<std::string>();
      ColumnSpec c;
      if (kind == "categorical") {
        c = ColumnSpec::categorical(jc.at("name"), jc.at("domain").get<std::vector<std::string>>());
        for (const auto& p : jc.value("privileged", nlohmann::json::array())) {
          const auto it = std::find(c.categories.begin(), c.categories.end(), p.get<std::string>());
          if (it == c.categories.end()) {
            throw Error(ErrorCode::InvalidSchema, "privileged value not in domain of '" + c.name + "'");
          }
          c.privileged.push_back(static_cast<double>(it - c.categories.begin()));
        }
      } else if (kind == "numeric") {
        const auto& dom = jc.at("domain");
        c = ColumnSpec::numeric(jc.at("name"), dom.at(0).get<double>(), dom.at(1).get<double>(),
                                jc.value("integer", true));
        c.privileged = jc.value("privileged", std::vector<double>{});
      } else {
        throw Error(ErrorCode::InvalidSchema, "unknown column kind '" + kind + "'");
      }
      c.is_protected = jc.value("protected", false);
      cols.push_back(std::move(c));
    }
    return Schema(std::move(cols), j.at("label").get<std::string>(), j.value("favorable_label", 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, e.what());
  }
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open schema '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::size_t RowHash::operator()(const Row& row) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (double v : row.values) {
    h ^= std::hash<double>{}(v);
    h *= 1099511628211ull;
  }
  return h;
}

bool is_valid_row(const Schema& schema, const Row& row) {
  if (row.size() != schema.size()) return false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!schema.column(i).contains(row[i])) return false;
  }
  return true;
}

void validate_row(const Schema& schema, const Row& row) {
  if (row.size() != schema.size()) {
    throw Error(ErrorCode::OutOfDomainValue, "row arity " + std::to_string(row.size()) + " != " +
                                                 std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!schema.column(i).contains(row[i])) {
      throw Error(ErrorCode::OutOfDomainValue, "column '" + schema.column(i).name + "' value " +
                                                   format_number(row[i]) + " outside domain");
    }
  }
}

void Dataset::validate() const {
  if (rows.size() != labels.size()) throw Error(ErrorCode::BadLabel, "rows and labels differ in length");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    validate_row(schema, rows[r]);
    if (labels[r] != 0 && labels[r] != 1) throw Error(ErrorCode::BadLabel, "row " + std::to_string(r));
  }
}

std::vector<double> Dataset::column(std::size_t i) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[i]);
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (!(a.schema.columns() == b.schema.columns())) {
    throw Error(ErrorCode::InvalidSchema, "cannot concatenate datasets with different schemas");
  }
  Dataset out = a;
  out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

double encode_value(const ColumnSpec& column, double v) {
  const double span = column.hi - column.lo;
  if (span <= 0.0) return 0.0;
  return (v - column.lo) / span;
}

void encode_into(const Schema& schema, const Row& row, std::span<double> out) {
  for (std::size_t i = 0; i < schema.size(); ++i) out[i] = encode_value(schema.column(i), row[i]);
}

FeatureVector encode(const Schema& schema, const Row& row) {
  FeatureVector fv;
  fv.entries.resize(schema.size());
  encode_into(schema, row, fv.entries);
  fv.encoding_map.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) fv.encoding_map.push_back({i, i + 1});
  return fv;
}

std::vector<Row> protected_variants(const Schema& schema, const Row& row) {
  const auto prot = schema.protected_indices();
  std::size_t total = 1;
  for (auto i : prot) total *= schema.column(i).cardinality();

  std::vector<Row> out;
  if (total == 0) return out;
  out.reserve(total - 1);
  // Mixed-radix counter over the protected columns, first protected column most significant.
  std::vector<std::size_t> digit(prot.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Row candidate = row;
    for (std::size_t k = 0; k < prot.size(); ++k) candidate[prot[k]] = schema.column(prot[k]).value_at(digit[k]);
    if (candidate != row) out.push_back(std::move(candidate));
    for (std::size_t k = prot.size(); k-- > 0;) {
      if (++digit[k] < schema.column(prot[k]).cardinality()) break;
      digit[k] = 0;
    }
  }
  return out;
}

UniformRowStream::UniformRowStream(Schema schema, std::uint64_t seed) : schema_(std::move(schema)), rng_(seed) {}

std::vector<Row> UniformRowStream::next(std::size_t n) {
  std::vector<Row> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    Row row;
    row.values.resize(schema_.size());
    for (std::size_t i = 0; i < schema_.size(); ++i) {
      const auto& c = schema_.column(i);
      const auto card = c.cardinality();
      if (card > 0) {
        std::uniform_int_distribution<std::size_t> pick(0, card - 1);
        row[i] = c.value_at(pick(rng_));
      } else {
        std::uniform_real_distribution<double> pick(c.lo, c.hi);
        row[i] = std::min(pick(rng_), c.hi);
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<Row> sample_uniform(const Schema& schema, std::size_t n, std::uint64_t seed) {
  return UniformRowStream(schema, seed).next(n);
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, path.string() + ": empty file");

  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(std::string(header[i]), i);

  // Columns not named by the schema are ignored.
  std::vector<std::size_t> source(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto it = position.find(schema.column(c).name);
    if (it == position.end()) {
      throw Error(ErrorCode::MissingColumn, path.string() + ": header lacks '" + schema.column(c).name + "'");
    }
    source[c] = it->second;
  }
  const auto label_it = position.find(schema.label_name());
  if (label_it == position.end()) {
    throw Error(ErrorCode::MissingColumn, path.string() + ": header lacks label '" + schema.label_name() + "'");
  }

  Dataset ds{schema, {}, {}};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MissingColumn, where + ": expected " + std::to_string(header.size()) + " cells, got " +
                                                std::to_string(cells.size()));
    }
    Row row;
    row.values.resize(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
      try {
        row[c] = schema.column(c).parse(cells[source[c]]);
      } catch (const Error& e) {
        throw Error(ErrorCode::OutOfDomainValue, where + ": " + e.what());
      }
    }
    const auto label = cells[label_it->second];
    if (label != "0" && label != "1") {
      throw Error(ErrorCode::BadLabel, where + ": label '" + std::string(label) + "' is not 0 or 1");
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label == "1" ? 1 : 0);
  }
  return ds;
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  const auto& schema = dataset.schema;
  for (std::size_t c = 0; c < schema.size(); ++c) out << schema.column(c).name << ',';
  out << schema.label_name() << '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) out << schema.column(c).format(dataset.rows[r][c]) << ',';
    out << dataset.labels[r] << '\n';
  }
}

}  // namespace limi

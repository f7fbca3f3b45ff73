#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "limi/generator.hpp"
#include "limi/models.hpp"
#include "limi/schema.hpp"

namespace limi::test {

/// Classifier defined by a favorable-class probability function.
class FunctionClassifier final : public Classifier {
 public:
  FunctionClassifier(Schema schema, std::function<double(const Row&)> p) : schema_(std::move(schema)), p_(std::move(p)) {}
  const Schema& schema() const override { return schema_; }
  Prediction predict(const Row& row) const override {
    return Prediction::from_favorable_probability(p_(row), schema_.favorable_label());
  }

 private:
  Schema schema_;
  std::function<double(const Row&)> p_;
};

/// g(z) = z, clamped into real-valued columns [-50, 50].
class IdentityGenerator final : public Generator {
 public:
  explicit IdentityGenerator(std::size_t dim) {
    std::vector<ColumnSpec> cols;
    for (std::size_t i = 0; i < dim; ++i) cols.push_back(ColumnSpec::numeric("z" + std::to_string(i), -50, 50, false));
    cols.push_back(ColumnSpec::categorical("flag", {"a", "b"}));
    cols.back().is_protected = true;
    schema_ = Schema(std::move(cols), "label");
  }
  std::size_t latent_dim() const override { return schema_.size() - 1; }
  const Schema& schema() const override { return schema_; }
  Row decode(std::span<const double> z) const override {
    Row r;
    for (double v : z) r.values.push_back(std::clamp(v, -50.0, 50.0));
    r.values.push_back(0.0);
    return r;
  }

 private:
  Schema schema_;
};

/// gender {F, M} (protected, privileged M), age bins 1..9, color {red, green, blue}.
inline Schema person_schema() {
  auto gender = ColumnSpec::categorical("gender", {"F", "M"});
  gender.is_protected = true;
  gender.privileged = {1.0};
  return Schema({gender, ColumnSpec::numeric("age", 1, 9), ColumnSpec::categorical("color", {"red", "green", "blue"})},
                "label");
}

inline double relative_error(double a, double b) { return std::fabs(a - b) / std::max({1e-12, std::fabs(a), std::fabs(b)}); }

inline std::vector<double> uniform_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

}  // namespace limi::test

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "limi/schema.hpp"

namespace limi {

using LatentVector = std::vector<double>;

/// Latent-to-row decoder g(z). Implementations must be pure: the same z always decodes
/// to the same row.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::size_t latent_dim() const = 0;
  virtual const Schema& schema() const = 0;
  virtual Row decode(std::span<const double> z) const = 0;
  virtual std::vector<Row> decode_batch(std::span<const LatentVector> zs) const;
};

using GeneratorHandle = std::shared_ptr<const Generator>;

/// i.i.d. standard-normal latent vectors.
std::vector<LatentVector> sample_latents(std::size_t n, std::size_t latent_dim, std::uint64_t seed);

/// Deterministic stream of standard-normal latents; successive `next` calls continue the
/// sequence `sample_latents` would produce for the same seed.
class LatentStream {
 public:
  LatentStream(std::size_t latent_dim, std::uint64_t seed);
  std::vector<LatentVector> next(std::size_t n);

 private:
  std::size_t dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

struct NumericMarginal {
  std::vector<double> sorted;  // order statistics of the training column
};

struct CategoricalMarginal {
  std::vector<double> cumulative;  // cumulative[i] = P(category <= i); last entry is 1
};

/// Gaussian-copula tabular model: per-column empirical marginals joined through a
/// correlation matrix Sigma = L * L^T over normal scores.
struct CopulaModel {
  Schema schema;
  std::vector<NumericMarginal> numeric;          // indexed by column; empty for categorical columns
  std::vector<CategoricalMarginal> categorical;  // indexed by column; empty for numeric columns
  Eigen::MatrixXd factor;                        // lower-triangular L
  double ridge = 0.0;                            // delta added to the diagonal before factorizing

  std::size_t latent_dim() const { return schema.size(); }
  Eigen::MatrixXd correlation() const { return factor * factor.transpose(); }

  nlohmann::json to_json() const;
  static CopulaModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static CopulaModel load(const std::filesystem::path& path);
};

/// Fits marginals and the normal-score correlation. Throws DegenerateColumn for a
/// column with fewer than two distinct values.
CopulaModel fit_copula(const Dataset& dataset);

/// Inverse empirical CDF by linear interpolation between adjacent order statistics.
double numeric_inverse_cdf(const NumericMarginal& marginal, double u);
/// Category whose cumulative interval [c_{i-1}, c_i) contains u.
std::size_t categorical_inverse_cdf(const CategoricalMarginal& marginal, double u);

class CopulaGenerator final : public Generator {
 public:
  explicit CopulaGenerator(CopulaModel model);

  std::size_t latent_dim() const override { return model_.latent_dim(); }
  const Schema& schema() const override { return model_.schema; }
  Row decode(std::span<const double> z) const override;

  const CopulaModel& model() const { return model_; }

 private:
  CopulaModel model_;
};

}  // namespace limi

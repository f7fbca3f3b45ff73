#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "limi/generator.hpp"
#include "limi/models.hpp"

namespace limi {

/// Linear hyperplane w^T z + b = 0 in latent space. The positive side holds latents the
/// target model labels 1.
class SurrogateBoundary {
 public:
  /// Throws InvalidConfig when w is zero.
  SurrogateBoundary(std::vector<double> w, double b);

  const std::vector<double>& w() const { return w_; }
  double b() const { return b_; }
  double norm() const { return norm_; }
  std::size_t dim() const { return w_.size(); }

  std::vector<double> unit_normal() const;
  double unit_bias() const { return b_ / norm_; }

  nlohmann::json to_json() const;
  static SurrogateBoundary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SurrogateBoundary load(const std::filesystem::path& path);

  bool operator==(const SurrogateBoundary&) const = default;

 private:
  std::vector<double> w_;
  double b_;
  double norm_;
};

/// Signed Euclidean distance (w^T z + b) / |w|.
double distance(const SurrogateBoundary& boundary, std::span<const double> z);

struct AuxConfig {
  /// How a label with more than per_class confident samples is cut down.
  enum class Truncation { Random, HighestScore };

  std::size_t n_init = 100'000;
  double epsilon = 0.7;
  std::size_t per_class = 5'000;
  Truncation truncation = Truncation::Random;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AuxDataset {
  std::vector<LatentVector> latents;
  std::vector<int> labels;
  /// Per-label counts that survived the confidence filter, before balancing.
  std::array<std::size_t, 2> filtered_counts{0, 0};
  /// Smallest score among retained (pre-replication) samples.
  double min_retained_score = 1.0;
};

/// Ranks latents by the model's confidence on their decoded rows, drops those below
/// epsilon and balances both labels to exactly per_class samples: seeded replication
/// below per_class, cfg.truncation above it. Throws
/// BoundaryUnlearnable when a label is absent after filtering.
AuxDataset build_aux(const Generator& gen, const Classifier& model, const AuxConfig& cfg);
/// Same, over an explicit latent sample (cfg.n_init is ignored).
AuxDataset build_aux(const Generator& gen, const Classifier& model, std::span<const LatentVector> latents,
                     const AuxConfig& cfg);

struct SvmConfig {
  double reg = 1e-4;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear SVM by Pegasos stochastic subgradient descent (step 1/(reg*t), projection onto
/// the 1/sqrt(reg) ball). The bias is folded in as a constant feature.
SurrogateBoundary fit_boundary(const AuxDataset& aux, const SvmConfig& cfg);

/// (reg/2)(|w|^2 + b^2) + mean hinge loss over aux.
double svm_objective(const std::vector<double>& w, double b, const AuxDataset& aux, double reg);

/// Area under the ROC curve of `scores` for label 1 vs label 0 via the Mann-Whitney
/// statistic with midranks (ties count 1/2). Throws OneClassSample.
double auc(std::span<const double> scores, std::span<const int> labels);
double boundary_auc(const SurrogateBoundary& boundary, std::span<const LatentVector> latents,
                    std::span<const int> labels);

}  // namespace limi

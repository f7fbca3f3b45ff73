#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "limi/generator.hpp"
#include "limi/models.hpp"
#include "limi/surrogate.hpp"

namespace limi {

/// z0 = z - (w_u^T z + b_u) w_u: the closest point of the surrogate hyperplane.
LatentVector project(const SurrogateBoundary& boundary, std::span<const double> z);

/// (z0 + lambda w_u, z0 - lambda w_u).
std::pair<LatentVector, LatentVector> candidates(const SurrogateBoundary& boundary, std::span<const double> z0,
                                                 double lambda);

struct IterativeProbeConfig {
  int dir = 1;
  double step = 0.1;
  std::size_t max_iters = 100;
};

struct IterativeProbeResult {
  LatentVector z;
  std::size_t steps = 0;
};

/// Walks z along dir * step * w_u until the side of the boundary changes (distance 0
/// counts as the non-negative side). Throws NoConvergence after max_iters steps.
IterativeProbeResult iterative_probe(const SurrogateBoundary& boundary, std::span<const double> z,
                                     const IterativeProbeConfig& cfg);

/// Hyperplane w_p^T z + b_p = 0 separating the values of a protected attribute in latent space.
class ProtectedHyperplane {
 public:
  /// Normalizes (w, b) so that |w_p| = 1.
  ProtectedHyperplane(std::vector<double> w, double b);

  const std::vector<double>& w() const { return w_; }
  double b() const { return b_; }

 private:
  std::vector<double> w_;
  double b_;
};

/// Reflection across the hyperplane: z - 2 (w_p^T z + b_p) w_p.
LatentVector latent_flip(const ProtectedHyperplane& h, std::span<const double> z);

enum class ProbeSource { Z0, ZPlus, ZMinus, Random };
std::string_view to_string(ProbeSource source);

struct DiscriminatoryPair {
  Row x;
  Row x_variant;
  Prediction prediction;
  Prediction variant_prediction;
  ProbeSource source = ProbeSource::Z0;
};

/// The first protected variant of `row` (in protected_variants order) whose predicted
/// label differs from the row's.
std::optional<DiscriminatoryPair> is_discriminatory(const Classifier& model, const Schema& schema, const Row& row);
/// Batched form; one model call for all rows and their variants.
std::vector<std::optional<DiscriminatoryPair>> find_discriminatory(const Classifier& model, const Schema& schema,
                                                                   std::span<const Row> rows);

struct ProbeConfig {
  double lambda = 0.3;
  std::size_t budget = 30'000;
  std::optional<double> time_limit_secs;
  bool dedup = true;
  std::uint64_t seed = 0;
  /// Tuples evaluated between budget/time checks.
  std::size_t chunk = 1024;

  void validate() const;
};

struct ProbeStats {
  std::size_t tested = 0;     // decoded-and-tested cases
  std::size_t found = 0;      // |D_idi| as reported (unique when dedup is on)
  std::size_t raw_found = 0;  // discriminatory tests before deduplication
  std::size_t tuples = 0;     // latent tuples (or random rows) consumed
  double elapsed_secs = 0.0;
  double egs = 0.0;
};

struct ProbeResult {
  std::vector<DiscriminatoryPair> pairs;
  ProbeStats stats;
};

/// Latent candidates probing over a fresh seeded latent stream: for every z test
/// g(z0), g(z+), g(z-) in that order and stop at the first discriminatory one.
ProbeResult run(const Generator& gen, const Classifier& model, const SurrogateBoundary& boundary,
                const Schema& schema, const ProbeConfig& cfg);
/// Same over an explicit latent sample; stops early when the sample is exhausted.
ProbeResult run(const Generator& gen, const Classifier& model, const SurrogateBoundary& boundary,
                const Schema& schema, const ProbeConfig& cfg, std::span<const LatentVector> latents);

/// Uniform-random comparison baseline under the same budget and time accounting.
ProbeResult run_random(const Classifier& model, const Schema& schema, const ProbeConfig& cfg);

}  // namespace limi

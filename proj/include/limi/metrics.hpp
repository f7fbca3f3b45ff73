#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "limi/models.hpp"
#include "limi/schema.hpp"

namespace limi {

// Column-shape and pair-trend similarities. All return values in [0, 1], 1 meaning
// identical distributions.

/// 1 - sup_t |ECDF_real(t) - ECDF_syn(t)|.
double ks_complement(std::span<const double> real, std::span<const double> syn);
/// 1 - (1/2) sum_c |freq_real(c) - freq_syn(c)| over category codes.
double tv_complement(std::span<const double> real, std::span<const double> syn);

/// Sample Pearson correlation; throws ConstantColumn.
double pearson(std::span<const double> a, std::span<const double> b);
/// 1 - |rho_real - rho_syn| / 2.
double pearson_similarity(std::span<const double> real_a, std::span<const double> real_b,
                          std::span<const double> syn_a, std::span<const double> syn_b);

/// 1 - (1/2) sum over joint cells |P_real - P_syn|. Numeric members are cut into 10
/// equal-width bins spanning the real column's range; values outside clamp to the edge bins.
double contingency_similarity(const ColumnSpec& col_a, const ColumnSpec& col_b, std::span<const double> real_a,
                              std::span<const double> real_b, std::span<const double> syn_a,
                              std::span<const double> syn_b);

struct ColumnShapeScore {
  std::string column;
  std::string metric;  // "ks" or "tv"
  double score = 0.0;
};

struct PairTrendScore {
  std::string column_a;
  std::string column_b;
  std::string metric;  // "pearson" or "contingency"
  double score = 0.0;
};

struct NaturalnessReport {
  std::vector<ColumnShapeScore> shapes;
  std::vector<PairTrendScore> trends;
  /// Numeric pairs with a constant column in either table; Pearson is undefined there.
  std::vector<std::pair<std::string, std::string>> skipped_pairs;
  double shape_mean = 0.0;
  double trend_mean = 0.0;
  double atn = 0.0;
  std::size_t repeats = 1;

  nlohmann::json to_json() const;
};

/// Average tabular naturalness of `generated` against `original`.
NaturalnessReport atn(const Dataset& generated, const Dataset& original);

/// ATN averaged over `repeats` draws in which both tables are subsampled without
/// replacement to min(|generated|, |original|) rows.
NaturalnessReport atn_repeated(const Dataset& generated, const Dataset& original, std::size_t repeats,
                               std::uint64_t seed);

/// Mean over generated rows of the Euclidean distance (encoded space) to the nearest original row.
double ann_distance(const Dataset& original, const Dataset& generated);

/// Discriminatory instances found per second. Throws ZeroElapsed.
double egs(std::size_t found, double elapsed_secs);

/// Fraction of n uniformly sampled rows that are individually discriminatory.
double if_r(const Classifier& model, const Schema& schema, std::size_t n, std::uint64_t seed);
/// Fraction of dataset rows that are individually discriminatory under `schema`'s protected set.
double if_o(const Classifier& model, const Schema& schema, const Dataset& dataset);

struct GroupRates {
  std::size_t count = 0;
  std::size_t positives = 0;  // ground-truth favorable
  std::size_t negatives = 0;
  double positive_rate = 0.0;  // P(prediction favorable)
  double tpr = 0.0;
  double fpr = 0.0;
};

struct GroupFairness {
  GroupRates privileged;
  GroupRates unprivileged;
  double spd = 0.0;
  double aod = 0.0;
  bool aod_defined = false;
};

/// Group statistics of the model's predictions on `dataset` split by the privileged
/// values of `protected_col`. Throws EmptyGroup.
GroupFairness group_fairness(const Classifier& model, const Dataset& dataset, std::size_t protected_col);
/// |P(favorable | unprivileged) - P(favorable | privileged)|.
double spd(const Classifier& model, const Dataset& dataset, std::size_t protected_col);
/// (|dFPR| + |dTPR|) / 2. Throws UndefinedRate when a group lacks positives or negatives.
double aod(const Classifier& model, const Dataset& dataset, std::size_t protected_col);

struct FairnessReport {
  double if_r = 0.0;
  double if_o = 0.0;
  double spd = 0.0;
  double aod = 0.0;
  GroupFairness groups;
  std::string protected_column;

  nlohmann::json to_json() const;
};

FairnessReport fairness_report(const Classifier& model, const Schema& schema, const Dataset& dataset,
                               std::size_t protected_col, std::size_t if_r_samples, std::uint64_t seed);

}  // namespace limi

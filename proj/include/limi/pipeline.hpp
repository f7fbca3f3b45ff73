#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "limi/bridge.hpp"
#include "limi/generator.hpp"
#include "limi/models.hpp"
#include "limi/probe.hpp"
#include "limi/surrogate.hpp"

namespace limi {

struct MetricOptions {
  std::size_t if_r_samples = 100'000;
  std::size_t atn_repeats = 10;
  std::size_t heldout_latents = 20'000;
  /// Rows decoded for the generator's calibration ATN.
  std::size_t calibration_rows = 10'000;
};

struct RetrainConfig {
  double fraction = 0.30;
  std::size_t k = 5;
  /// Leave protected columns out of the neighbour distance.
  bool exclude_protected = true;
  /// Add each sampled instance together with its protected variants under one label;
  /// the total added stays fraction * |original|.
  bool include_variants = false;
  /// Independent (sample, before model, after model) draws; results are averaged.
  std::size_t repeats = 5;
  void validate() const;
};

/// Everything a command needs. Relative paths in the JSON resolve against the config
/// file's directory. Unset artifact paths default to files in the output directory.
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path test_dataset;
  std::filesystem::path schema;
  std::vector<std::string> protected_columns{"sex"};

  std::filesystem::path model;       // DenseNetwork JSON
  std::string model_command;         // bridge command; wins over `model`
  std::filesystem::path generator;   // copula JSON
  std::string generator_command;     // bridge command; wins over `generator`
  std::filesystem::path boundary;
  std::filesystem::path d_idi;

  AuxConfig aux;
  SvmConfig svm;
  ProbeConfig probe;
  bool reuse_init = false;  // probe the auxiliary sample instead of fresh latents
  MlpConfig mlp;
  MetricOptions metrics;
  RetrainConfig retrain;
  std::vector<double> lambdas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

  std::uint64_t seed = 0;
  std::filesystem::path out = "limi-run";
  bool full_scale = false;

  /// Sets the per-operation seeds from `seed`.
  void propagate_seed();
  /// Switches sample sizes, budget and epochs to the full-scale settings.
  void apply_full_scale();
  void validate() const;

  std::filesystem::path model_path() const;
  std::filesystem::path generator_path() const;
  std::filesystem::path boundary_path() const;
  std::filesystem::path d_idi_path() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
};

/// Deterministic per-purpose seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Loaded collaborators of a run.
Schema run_schema(const RunConfig& cfg);
Dataset load_train(const RunConfig& cfg);
Dataset load_test(const RunConfig& cfg);
ClassifierHandle load_model(const RunConfig& cfg, const Schema& schema);
GeneratorHandle load_generator(const RunConfig& cfg, const Schema& schema);

/// D_idi file: x in the schema columns with the model's label for x in the label column,
/// then x' as variant_<column>, its label, both scores and the probe source. Reads back
/// through load_csv as the x rows.
void write_d_idi(const std::filesystem::path& path, const Schema& schema, const std::vector<DiscriminatoryPair>& pairs);

/// Most common label among the k nearest `reference` rows of each query (encoded
/// Euclidean distance over all columns but `ignored`, ties in distance broken by row
/// order, ties in votes to the favorable label).
std::vector<int> knn_majority_labels(const Dataset& reference, std::span<const Row> queries, std::size_t k,
                                     std::span<const std::size_t> ignored = {});

// Commands. Each writes its artifacts and a report into cfg.out and returns the report.
// Wall-clock quantities sit under the report's "timing" key; everything else is a
// deterministic function of the config.
nlohmann::json cmd_fit_gen(const RunConfig& cfg);
nlohmann::json cmd_train_model(const RunConfig& cfg);
nlohmann::json cmd_approximate(const RunConfig& cfg);
nlohmann::json cmd_probe(const RunConfig& cfg);
nlohmann::json cmd_baseline_random(const RunConfig& cfg);
nlohmann::json cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& d_idi);
nlohmann::json cmd_retrain(const RunConfig& cfg, const std::filesystem::path& d_idi);
nlohmann::json cmd_ablate_lambda(const RunConfig& cfg, const std::vector<double>& lambdas);

/// Copy of a report without its "timing" member.
nlohmann::json strip_timing(nlohmann::json report);

}  // namespace limi

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "limi/error.hpp"
#include "limi/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"limi: latent-space individual fairness testing for tabular classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool full_scale = false;
  app.add_option("--config", config_path, "run configuration JSON")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_flag("--full-scale", full_scale, "n_init 1M, per_class 50K, budget 1M, 1000 epochs, 1 h limit");

  app.add_subcommand("fit-gen", "fit and save the Gaussian-copula generator");
  app.add_subcommand("train-model", "train the built-in MLP target model");
  app.add_subcommand("approximate", "fit the surrogate boundary and report its fitness");
  app.add_subcommand("probe", "run latent candidate probing, write D_idi");
  app.add_subcommand("baseline-random", "uniform-random baseline under the same budget");
  std::string d_idi;
  auto* evaluate = app.add_subcommand("evaluate", "naturalness and fairness metrics for a D_idi file");
  evaluate->add_option("--d-idi", d_idi, "D_idi CSV (defaults to the run's)");
  auto* retrain = app.add_subcommand("retrain", "retrain on kNN-labelled discriminatory instances");
  retrain->add_option("--d-idi", d_idi, "D_idi CSV (defaults to the run's)");
  std::vector<double> lambdas;
  auto* ablate = app.add_subcommand("ablate-lambda", "probe once per lambda with shared latents");
  ablate->add_option("--lambdas", lambdas, "lambda grid (defaults to the config's)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = limi::RunConfig::load(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.propagate_seed();
    }
    if (!out.empty()) cfg.out = out;
    if (full_scale) cfg.apply_full_scale();
    cfg.validate();

    const auto verb = app.get_subcommands().front()->get_name();
    const auto d_idi_path = d_idi.empty() ? cfg.d_idi_path() : std::filesystem::path(d_idi);
    nlohmann::json report;
    if (verb == "fit-gen") {
      report = limi::cmd_fit_gen(cfg);
    } else if (verb == "train-model") {
      report = limi::cmd_train_model(cfg);
    } else if (verb == "approximate") {
      report = limi::cmd_approximate(cfg);
    } else if (verb == "probe") {
      report = limi::cmd_probe(cfg);
    } else if (verb == "baseline-random") {
      report = limi::cmd_baseline_random(cfg);
    } else if (verb == "evaluate") {
      report = limi::cmd_evaluate(cfg, d_idi_path);
    } else if (verb == "retrain") {
      report = limi::cmd_retrain(cfg, d_idi_path);
    } else {
      report = limi::cmd_ablate_lambda(cfg, lambdas.empty() ? cfg.lambdas : lambdas);
    }
    std::cout << report.dump(2) << '\n';
  } catch (const limi::Error& e) {
    std::cerr << "limi: " << e.what() << '\n';
    return static_cast<int>(e.family());
  } catch (const std::exception& e) {
    std::cerr << "limi: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// Acceptance gate: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "limi/metrics.hpp"
#include "limi/models.hpp"
#include "limi/pipeline.hpp"
#include "limi/probe.hpp"
#include "limi/surrogate.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace limi;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << std::fixed << v;
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Outcome geometry() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> dims(1, 32);
  std::uniform_real_distribution<double> lambdas(0.0, 2.0);
  double worst_proj = 0, worst_plus = 0, worst_minus = 0, worst_flip = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto n = dims(rng);
    std::vector<double> w;
    do {
      w = random_vector(rng, n, std::exp(std::uniform_real_distribution<double>(-3, 3)(rng)));
    } while (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }));
    const SurrogateBoundary boundary(w, random_vector(rng, 1, 3)[0]);
    const auto z = random_vector(rng, n, 3);
    const double lambda = lambdas(rng);
    const auto z0 = project(boundary, z);
    const auto [plus, minus] = candidates(boundary, z0, lambda);
    worst_proj = std::max(worst_proj, std::fabs(distance(boundary, z0)));
    worst_plus = std::max(worst_plus, std::fabs(distance(boundary, plus) - lambda));
    worst_minus = std::max(worst_minus, std::fabs(distance(boundary, minus) + lambda));
    const ProtectedHyperplane h(random_vector(rng, n, 1), random_vector(rng, 1, 2)[0]);
    const auto back = latent_flip(h, latent_flip(h, z));
    for (std::size_t k = 0; k < n; ++k) worst_flip = std::max(worst_flip, std::fabs(back[k] - z[k]));
  }
  const double worst = std::max({worst_proj, worst_plus, worst_minus, worst_flip});
  return {worst <= 1e-9, "max |d(z0)| " + std::to_string(worst_proj) + ", max |d(z+)-l| " + std::to_string(worst_plus) +
                             ", max |d(z-)+l| " + std::to_string(worst_minus) + ", max flip2 error " +
                             std::to_string(worst_flip)};
}

Outcome metric_oracles() {
  double worst = 0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::fabs(a - b)); };
  track(ks_complement(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 8}), 0.75);
  track(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);

  std::mt19937_64 rng(2);
  const auto cat = ColumnSpec::categorical("c", {"a", "b", "c"});
  const auto num = ColumnSpec::numeric("n", -5, 5, false);
  auto flag = ColumnSpec::categorical("g", {"x", "y"});
  flag.is_protected = true;
  const Schema schema({flag, ColumnSpec::numeric("age", 1, 9), ColumnSpec::numeric("r", -5, 5, false), cat}, "label");
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t nr = 2 + rng() % 19, ns = 2 + rng() % 19;
    auto reals = [&](std::size_t n) {
      std::uniform_real_distribution<double> u(-5, 5);
      std::vector<double> v(n);
      for (auto& x : v) x = trial % 2 ? std::round(u(rng)) : u(rng);
      return v;
    };
    auto codes = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& x : v) x = static_cast<double>(rng() % 3);
      return v;
    };
    const auto ra = reals(nr), rb = reals(nr), sa = reals(ns), sb = reals(ns);
    const auto rc = codes(nr), sc = codes(ns);
    track(ks_complement(ra, sa), oracle::ks(ra, sa));
    track(tv_complement(rc, sc), oracle::tv(rc, sc));
    auto varies = [](const std::vector<double>& v) { return std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; }); };
    if (varies(ra) && varies(rb) && varies(sa) && varies(sb)) {
      track(pearson_similarity(ra, rb, sa, sb), oracle::pearson_sim(ra, rb, sa, sb));
    }
    if (trial % 2 == 0) track(contingency_similarity(cat, num, rc, ra, sc, sa), oracle::contingency(cat, num, rc, ra, sc, sa));
    track(contingency_similarity(cat, cat, rc, rc, sc, sc), oracle::contingency(cat, cat, rc, rc, sc, sc));

    const auto o = sample_uniform(schema, nr, rng());
    const auto g = sample_uniform(schema, ns, rng());
    track(ann_distance(Dataset{schema, o, std::vector<int>(nr, 0)}, Dataset{schema, g, std::vector<int>(ns, 0)}),
          oracle::ann(schema, o, g));

    std::vector<int> labels(nr);
    for (auto& l : labels) l = static_cast<int>(rng() % 2);
    labels[0] = 0;
    labels[1] = 1;
    track(auc(ra, labels), oracle::auc(ra, labels));
  }
  return {worst <= 1e-12, "max deviation from brute force " + std::to_string(worst) + " over 500 tables"};
}

Outcome gradient_check() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(13, 10, [&] { return u(rng); });
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y(i) = i % 2;
  auto layers = init_layers(13, {64, 32, 16, 8, 4}, 4);
  std::normal_distribution<double> small(0.0, 0.1);
  for (auto& l : layers) l.bias = Eigen::VectorXd::NullaryExpr(l.bias.size(), [&] { return small(rng); });
  const double margin = oracle::kink_margin(layers, x);
  if (margin <= 1e-6) return {false, "evaluation point within 1e-6 of a rectifier kink"};
  const auto lg = loss_and_gradient(layers, x, y);
  std::normal_distribution<double> n01;
  const double h = 1e-7;
  double worst = 0;
  for (int slice = 0; slice < 20; ++slice) {
    auto plus = layers, minus = layers;
    double analytic = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Eigen::MatrixXd dw = Eigen::MatrixXd::NullaryExpr(layers[l].weights.rows(), layers[l].weights.cols(),
                                                              [&] { return n01(rng); });
      const Eigen::VectorXd db = Eigen::VectorXd::NullaryExpr(layers[l].bias.size(), [&] { return n01(rng); });
      plus[l].weights += h * dw;
      plus[l].bias += h * db;
      minus[l].weights -= h * dw;
      minus[l].bias -= h * db;
      analytic += (dw.array() * lg.gradient[l].weights.array()).sum() + db.dot(lg.gradient[l].bias);
    }
    const double numeric = (loss_only(plus, x, y) - loss_only(minus, x, y)) / (2 * h);
    worst = std::max(worst, std::fabs(analytic - numeric) / std::max(std::fabs(analytic), std::fabs(numeric)));
  }
  return {worst <= 1e-4, "max relative error " + std::to_string(worst) + " over 20 random directions"};
}

// Shared desk-scale pipeline on Adult.
struct Desk {
  RunConfig cfg;
  json fit_gen, train, fitness, probe, random, eval_limi, eval_random, ablation;
};

RunConfig desk_config(const fs::path& config_path, const fs::path& work) {
  auto cfg = RunConfig::load(config_path);
  cfg.out = work / "desk";
  return cfg;
}

RunConfig sharing(const RunConfig& base, const fs::path& out) {
  RunConfig c = base;
  c.model = base.model_path();
  c.generator = base.generator_path();
  c.boundary = base.boundary_path();
  c.d_idi.clear();
  c.out = out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string config = LIMI_DESK_CONFIG;
  std::string work = "acceptance-work";
  std::vector<int> expect_fail;
  app.add_option("--config", config, "desk config")->check(CLI::ExistingFile);
  app.add_option("--work", work, "scratch directory");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::map<int, Outcome> results;
  std::map<int, double> seconds;
  auto timed = [&](int id, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      results[id] = fn();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
    seconds[id] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "  [" << id << "] " << results[id].detail << " (" << fmt(seconds[id], 1) << " s)" << std::endl;
  };

  timed(1, geometry);
  timed(2, metric_oracles);
  timed(9, gradient_check);

  const fs::path work_dir = fs::absolute(work);
  fs::remove_all(work_dir);
  Desk desk{desk_config(config, work_dir), {}, {}, {}, {}, {}, {}, {}, {}};
  const auto& cfg = desk.cfg;
  bool pipeline_ok = true;
  try {
    desk.fit_gen = cmd_fit_gen(cfg);
    desk.train = cmd_train_model(cfg);
    std::cout << "  model test accuracy " << fmt(desk.train["test_accuracy"].get<double>()) << ", generator calibration ATN "
              << fmt(desk.fit_gen["calibration"]["atn"].get<double>()) << std::endl;
  } catch (const std::exception& e) {
    std::cout << "  pipeline setup failed: " << e.what() << std::endl;
    pipeline_ok = false;
  }

  auto needs_pipeline = [&](int id, const std::function<Outcome()>& fn) {
    if (!pipeline_ok) {
      results[id] = {false, "pipeline setup failed"};
      return;
    }
    timed(id, fn);
  };

  needs_pipeline(3, [&] {
    desk.fitness = cmd_approximate(cfg);
    const double heldout = desk.fitness["auc"]["heldout"].get<double>();
    return Outcome{heldout >= 0.80, "held-out AUC " + fmt(heldout) + " (train " + fmt(desk.fitness["auc"]["train"].get<double>()) +
                                        ", entire " + fmt(desk.fitness["auc"]["entire"].get<double>()) + ")"};
  });
  needs_pipeline(4, [&] {
    desk.probe = cmd_probe(cfg);
    desk.random = cmd_baseline_random(cfg);
    const double limi_yield = desk.probe["found"].get<double>() / desk.probe["tested"].get<double>();
    const double random_yield = desk.random["found"].get<double>() / desk.random["tested"].get<double>();
    const double ratio = limi_yield / random_yield;

    // Same budget with the highest-score truncation of the auxiliary set, for reference.
    auto alt = sharing(cfg, work_dir / "highest_score");
    alt.boundary.clear();
    alt.aux.truncation = AuxConfig::Truncation::HighestScore;
    const auto alt_fit = cmd_approximate(alt);
    const auto alt_probe = cmd_probe(alt);
    const double alt_ratio = alt_probe["found"].get<double>() / alt_probe["tested"].get<double>() / random_yield;
    return Outcome{ratio >= 2.0, "LIMI " + desk.probe["found"].dump() + " / random " + desk.random["found"].dump() +
                                     " unique of " + desk.probe["tested"].dump() + " tests, ratio " + fmt(ratio, 2) +
                                     "; highest-score truncation: found " + alt_probe["found"].dump() + ", ratio " +
                                     fmt(alt_ratio, 2) + ", held-out AUC " +
                                     fmt(alt_fit["auc"]["heldout"].get<double>())};
  });
  needs_pipeline(5, [&] {
    desk.eval_limi = cmd_evaluate(cfg, cfg.d_idi_path());
    desk.eval_random = cmd_evaluate(cfg, cfg.out / "random_d_idi.csv");
    const double a = desk.eval_limi["naturalness"]["atn"].get<double>();
    const double b = desk.eval_random["naturalness"]["atn"].get<double>();
    return Outcome{a - b >= 0.05, "ATN LIMI " + fmt(a) + " vs random " + fmt(b) + ", gap " + fmt(a - b) + "; ANN " +
                                      fmt(desk.eval_limi["ann_distance"].get<double>()) + " vs " +
                                      fmt(desk.eval_random["ann_distance"].get<double>())};
  });
  needs_pipeline(6, [&] {
    desk.ablation = cmd_ablate_lambda(cfg, {0.0, 0.3});
    const auto f0 = desk.ablation["rows"][0]["found"].get<std::size_t>();
    const auto f3 = desk.ablation["rows"][1]["found"].get<std::size_t>();
    return Outcome{f3 >= f0, "found(0) " + std::to_string(f0) + ", found(0.3) " + std::to_string(f3) + ", ratio " +
                                 fmt(static_cast<double>(f3) / static_cast<double>(f0), 2)};
  });

  const auto retrain_cfg = [&] {
    auto c = sharing(cfg, work_dir / "retrain");
    c.probe.budget = 150'000;
    return c;
  }();
  needs_pipeline(8, [&] {
    std::vector<std::string> diffs;
    auto same = [&](const std::string& what, const json& a, const json& b) {
      if (strip_timing(a).dump() != strip_timing(b).dump()) diffs.push_back(what);
    };
    auto same_file = [&](const fs::path& p, const std::string& before) {
      if (slurp(p) != before) diffs.push_back(p.filename().string());
    };
    const auto generator = slurp(cfg.generator_path());
    const auto model = slurp(cfg.model_path());
    const auto boundary = slurp(cfg.boundary_path());
    const auto d_idi = slurp(cfg.d_idi_path());
    same("fit-gen", desk.fit_gen, cmd_fit_gen(cfg));
    same("train-model", desk.train, cmd_train_model(cfg));
    same("approximate", desk.fitness, cmd_approximate(cfg));
    same("probe", desk.probe, cmd_probe(cfg));
    same("baseline-random", desk.random, cmd_baseline_random(cfg));
    same("evaluate", desk.eval_limi, cmd_evaluate(cfg, cfg.d_idi_path()));
    same("ablate-lambda", desk.ablation, cmd_ablate_lambda(cfg, {0.0, 0.3}));
    same_file(cfg.generator_path(), generator);
    same_file(cfg.model_path(), model);
    same_file(cfg.boundary_path(), boundary);
    same_file(cfg.d_idi_path(), d_idi);

    cmd_probe(retrain_cfg);
    auto once = retrain_cfg;
    once.d_idi = retrain_cfg.d_idi_path();
    once.out = work_dir / "retrain_once";
    once.retrain.repeats = 1;
    const auto first = cmd_retrain(once, once.d_idi);
    const auto first_model = slurp(once.out / "retrained_model.json");
    same("retrain", first, cmd_retrain(once, once.d_idi));
    same_file(once.out / "retrained_model.json", first_model);
    return Outcome{diffs.empty(), diffs.empty() ? "8 commands and 5 artifacts identical on rerun"
                                                : "differences in: " + [&] {
                                                    std::string s;
                                                    for (const auto& d : diffs) s += d + " ";
                                                    return s;
                                                  }()};
  });
  needs_pipeline(7, [&] {
    const auto d_idi = retrain_cfg.d_idi_path();
    if (!fs::exists(d_idi)) cmd_probe(retrain_cfg);
    const auto report = cmd_retrain(retrain_cfg, d_idi);
    const double before = report["mean"]["before"]["if_r"].get<double>();
    const double after = report["mean"]["after"]["if_r"].get<double>();
    const double drop = report["accuracy_drop"].get<double>();
    std::string per_run;
    for (const auto& r : report["runs"]) {
      per_run += " " + fmt(r["before"]["fairness"]["if_r"].get<double>(), 3) + "->" +
                 fmt(r["after"]["fairness"]["if_r"].get<double>(), 3);
    }
    return Outcome{after < before && drop <= 0.02,
                   "mean IF_r " + fmt(before) + " -> " + fmt(after) + " (per run" + per_run + "), IF_o " +
                       fmt(report["mean"]["before"]["if_o"].get<double>()) + " -> " +
                       fmt(report["mean"]["after"]["if_o"].get<double>()) + ", accuracy drop " + fmt(drop * 100, 2) +
                       " points"};
  });

  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  int unexpected = 0;
  std::cout << "\nacceptance summary\n";
  for (const auto& [id, r] : results) {
    std::string status;
    if (r.pass) {
      status = expected.count(id) ? "XPASS" : "PASS";
    } else if (expected.count(id)) {
      status = "FAIL (expected)";
    } else {
      status = "FAIL";
      ++unexpected;
    }
    std::cout << "criterion " << id << ": " << status << " - " << r.detail << " [" << fmt(seconds[id], 1) << " s]\n";
  }
  return unexpected == 0 ? 0 : 1;
}

#include "limi/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "limi/error.hpp"
#include "limi/metrics.hpp"
#include "limi/parallel.hpp"

namespace limi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw Error(ErrorCode::InvalidConfig, what + " path is not set");
  if (!fs::exists(path)) throw Error(ErrorCode::Io, what + " '" + path.string() + "' does not exist");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + cfg.out.string() + "'");
  write_json(cfg.out / "config.json", cfg.to_json());
}

std::size_t active_protected(const Schema& schema) {
  const auto idx = schema.protected_indices();
  if (idx.empty()) throw Error(ErrorCode::InvalidConfig, "no protected column selected");
  return idx.front();
}

json probe_report(const ProbeResult& result, const RunConfig& cfg, const std::string& method) {
  std::map<std::string, std::size_t> sources;
  for (const auto& p : result.pairs) ++sources[std::string(to_string(p.source))];
  const auto& s = result.stats;
  const double yield = s.tested == 0 ? 0.0 : static_cast<double>(s.found) / static_cast<double>(s.tested);
  return {{"method", method},
          {"budget", cfg.probe.budget},
          {"lambda", cfg.probe.lambda},
          {"dedup", cfg.probe.dedup},
          {"tested", s.tested},
          {"found", s.found},
          {"raw_found", s.raw_found},
          {"tuples", s.tuples},
          {"yield", yield},
          {"sources", sources},
          {"timing", {{"elapsed_secs", s.elapsed_secs}, {"egs", s.egs}}}};
}

ProbeResult run_probe(const RunConfig& cfg, const Generator& gen, const Classifier& model,
                      const SurrogateBoundary& boundary, const Schema& schema) {
  if (cfg.reuse_init) {
    const auto init = sample_latents(cfg.aux.n_init, gen.latent_dim(), cfg.aux.seed);
    return run(gen, model, boundary, schema, cfg.probe, init);
  }
  return run(gen, model, boundary, schema, cfg.probe);
}

json fairness_json(const Classifier& model, const Schema& schema, const Dataset& dataset, const RunConfig& cfg) {
  const auto col = active_protected(schema);
  const auto seed = derive_seed(cfg.seed, "if_r");
  if (schema.column(col).privileged.empty()) {
    // Group metrics need a privileged set; individual ones do not.
    return {{"protected_column", schema.column(col).name},
            {"if_r", if_r(model, schema, cfg.metrics.if_r_samples, seed)},
            {"if_o", if_o(model, schema, dataset)},
            {"spd", nullptr},
            {"aod", nullptr}};
  }
  return fairness_report(model, schema, dataset, col, cfg.metrics.if_r_samples, seed).to_json();
}

}  // namespace

void RetrainConfig::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidConfig, "retrain fraction must be in (0, 1]");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "retrain k must be positive");
  if (repeats == 0) throw Error(ErrorCode::InvalidConfig, "retrain repeats must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void RunConfig::propagate_seed() {
  aux.seed = derive_seed(seed, "aux");
  svm.seed = derive_seed(seed, "svm");
  probe.seed = derive_seed(seed, "probe");
  mlp.seed = derive_seed(seed, "mlp");
}

void RunConfig::apply_full_scale() {
  full_scale = true;
  aux.n_init = 1'000'000;
  aux.per_class = 50'000;
  probe.budget = 1'000'000;
  probe.time_limit_secs = 3600.0;
  mlp.epochs = 1000;
}

void RunConfig::validate() const {
  if (dataset.empty()) throw Error(ErrorCode::InvalidConfig, "config lacks 'dataset'");
  if (schema.empty()) throw Error(ErrorCode::InvalidConfig, "config lacks 'schema'");
  if (protected_columns.empty()) throw Error(ErrorCode::InvalidConfig, "config lists no protected columns");
  aux.validate();
  svm.validate();
  probe.validate();
  mlp.validate();
  retrain.validate();
}

fs::path RunConfig::model_path() const { return model.empty() ? out / "model.json" : model; }
fs::path RunConfig::generator_path() const { return generator.empty() ? out / "generator.json" : generator; }
fs::path RunConfig::boundary_path() const { return boundary.empty() ? out / "boundary.json" : boundary; }
fs::path RunConfig::d_idi_path() const { return d_idi.empty() ? out / "d_idi.csv" : d_idi; }

json RunConfig::to_json() const {
  json j = {{"dataset", dataset.string()},
            {"test_dataset", test_dataset.string()},
            {"schema", schema.string()},
            {"protected", protected_columns},
            {"model", model.string()},
            {"model_command", model_command},
            {"generator", generator.string()},
            {"generator_command", generator_command},
            {"boundary", boundary.string()},
            {"d_idi", d_idi.string()},
            {"aux",
             {{"n_init", aux.n_init},
              {"epsilon", aux.epsilon},
              {"per_class", aux.per_class},
              {"truncation", aux.truncation == AuxConfig::Truncation::Random ? "random" : "highest_score"}}},
            {"svm", {{"reg", svm.reg}, {"epochs", svm.epochs}}},
            {"probe",
             {{"lambda", probe.lambda},
              {"budget", probe.budget},
              {"time_limit_secs", probe.time_limit_secs ? json(*probe.time_limit_secs) : json(nullptr)},
              {"dedup", probe.dedup},
              {"chunk", probe.chunk},
              {"reuse_init", reuse_init}}},
            {"mlp",
             {{"hidden", mlp.hidden_sizes},
              {"learning_rate", mlp.learning_rate},
              {"epochs", mlp.epochs},
              {"batch_size", mlp.batch_size}}},
            {"metrics",
             {{"if_r_samples", metrics.if_r_samples},
              {"atn_repeats", metrics.atn_repeats},
              {"heldout_latents", metrics.heldout_latents},
              {"calibration_rows", metrics.calibration_rows}}},
            {"retrain",
             {{"fraction", retrain.fraction},
              {"label_rule", "knn_majority"},
              {"k", retrain.k},
              {"exclude_protected", retrain.exclude_protected},
              {"include_variants", retrain.include_variants},
              {"repeats", retrain.repeats}}},
            {"lambdas", lambdas},
            {"seed", seed},
            {"out", out.string()},
            {"full_scale", full_scale}};
  return j;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.dataset = resolve(base_dir, j.value("dataset", ""));
    c.test_dataset = resolve(base_dir, j.value("test_dataset", ""));
    c.schema = resolve(base_dir, j.value("schema", ""));
    c.protected_columns = j.value("protected", c.protected_columns);
    c.model = resolve(base_dir, j.value("model", ""));
    c.model_command = j.value("model_command", "");
    c.generator = resolve(base_dir, j.value("generator", ""));
    c.generator_command = j.value("generator_command", "");
    c.boundary = resolve(base_dir, j.value("boundary", ""));
    c.d_idi = resolve(base_dir, j.value("d_idi", ""));
    if (const auto a = j.value("aux", json::object()); !a.empty()) {
      c.aux.n_init = a.value("n_init", c.aux.n_init);
      c.aux.epsilon = a.value("epsilon", c.aux.epsilon);
      c.aux.per_class = a.value("per_class", c.aux.per_class);
      const auto truncation = a.value("truncation", std::string("random"));
      if (truncation == "random") {
        c.aux.truncation = AuxConfig::Truncation::Random;
      } else if (truncation == "highest_score") {
        c.aux.truncation = AuxConfig::Truncation::HighestScore;
      } else {
        throw Error(ErrorCode::InvalidConfig, "aux truncation must be 'random' or 'highest_score'");
      }
    }
    if (const auto s = j.value("svm", json::object()); !s.empty()) {
      c.svm.reg = s.value("reg", c.svm.reg);
      c.svm.epochs = s.value("epochs", c.svm.epochs);
    }
    if (const auto p = j.value("probe", json::object()); !p.empty()) {
      c.probe.lambda = p.value("lambda", c.probe.lambda);
      c.probe.budget = p.value("budget", c.probe.budget);
      if (p.contains("time_limit_secs") && !p["time_limit_secs"].is_null()) {
        c.probe.time_limit_secs = p["time_limit_secs"].get<double>();
      }
      c.probe.dedup = p.value("dedup", c.probe.dedup);
      c.probe.chunk = p.value("chunk", c.probe.chunk);
      c.reuse_init = p.value("reuse_init", c.reuse_init);
    }
    if (const auto m = j.value("mlp", json::object()); !m.empty()) {
      c.mlp.hidden_sizes = m.value("hidden", c.mlp.hidden_sizes);
      c.mlp.learning_rate = m.value("learning_rate", c.mlp.learning_rate);
      c.mlp.epochs = m.value("epochs", c.mlp.epochs);
      c.mlp.batch_size = m.value("batch_size", c.mlp.batch_size);
    }
    if (const auto m = j.value("metrics", json::object()); !m.empty()) {
      c.metrics.if_r_samples = m.value("if_r_samples", c.metrics.if_r_samples);
      c.metrics.atn_repeats = m.value("atn_repeats", c.metrics.atn_repeats);
      c.metrics.heldout_latents = m.value("heldout_latents", c.metrics.heldout_latents);
      c.metrics.calibration_rows = m.value("calibration_rows", c.metrics.calibration_rows);
    }
    if (const auto r = j.value("retrain", json::object()); !r.empty()) {
      if (r.value("label_rule", "knn_majority") != "knn_majority") {
        throw Error(ErrorCode::InvalidConfig, "unknown retrain label_rule");
      }
      c.retrain.fraction = r.value("fraction", c.retrain.fraction);
      c.retrain.k = r.value("k", c.retrain.k);
      c.retrain.exclude_protected = r.value("exclude_protected", c.retrain.exclude_protected);
      c.retrain.repeats = r.value("repeats", c.retrain.repeats);
      c.retrain.include_variants = r.value("include_variants", c.retrain.include_variants);
    }
    c.lambdas = j.value("lambdas", c.lambdas);
    c.seed = j.value("seed", c.seed);
    if (j.contains("out")) c.out = resolve(base_dir, j["out"].get<std::string>());
    c.propagate_seed();
    if (j.value("full_scale", false)) c.apply_full_scale();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

Schema run_schema(const RunConfig& cfg) {
  require_file(cfg.schema, "schema");
  return Schema::load(cfg.schema).with_protected(cfg.protected_columns);
}

Dataset load_train(const RunConfig& cfg) {
  require_file(cfg.dataset, "dataset");
  return load_csv(cfg.dataset, run_schema(cfg));
}

Dataset load_test(const RunConfig& cfg) {
  require_file(cfg.test_dataset, "test dataset");
  return load_csv(cfg.test_dataset, run_schema(cfg));
}

ClassifierHandle load_model(const RunConfig& cfg, const Schema& schema) {
  if (!cfg.model_command.empty()) {
    return std::make_shared<ExternalClassifier>(schema, BridgeChannel::spawn(cfg.model_command));
  }
  require_file(cfg.model_path(), "model");
  auto net = DenseNetwork::load(cfg.model_path());
  if (!(net.schema().columns().size() == schema.size())) {
    throw Error(ErrorCode::InvalidConfig, "model input arity does not match the schema");
  }
  return std::make_shared<DenseNetwork>(std::move(net));
}

GeneratorHandle load_generator(const RunConfig& cfg, const Schema& schema) {
  if (!cfg.generator_command.empty()) {
    return std::make_shared<ExternalGenerator>(schema, BridgeChannel::spawn(cfg.generator_command));
  }
  require_file(cfg.generator_path(), "generator");
  auto model = CopulaModel::load(cfg.generator_path());
  if (model.schema.size() != schema.size()) {
    throw Error(ErrorCode::InvalidConfig, "generator schema does not match the run schema");
  }
  model.schema = schema;
  return std::make_shared<CopulaGenerator>(std::move(model));
}

void write_d_idi(const fs::path& path, const Schema& schema, const std::vector<DiscriminatoryPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < schema.size(); ++c) out << schema.column(c).name << ',';
  out << schema.label_name() << ',';
  for (std::size_t c = 0; c < schema.size(); ++c) out << "variant_" << schema.column(c).name << ',';
  out << "variant_label,score,variant_score,source\n";
  out.precision(17);
  for (const auto& p : pairs) {
    for (std::size_t c = 0; c < schema.size(); ++c) out << schema.column(c).format(p.x[c]) << ',';
    out << p.prediction.label << ',';
    for (std::size_t c = 0; c < schema.size(); ++c) out << schema.column(c).format(p.x_variant[c]) << ',';
    out << p.variant_prediction.label << ',' << p.prediction.score << ',' << p.variant_prediction.score << ','
        << to_string(p.source) << '\n';
  }
}

std::vector<int> knn_majority_labels(const Dataset& reference, std::span<const Row> queries, std::size_t k,
                                     std::span<const std::size_t> ignored) {
  if (reference.empty()) throw Error(ErrorCode::EmptySample, "kNN labeling needs reference rows");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be positive");
  const auto& schema = reference.schema;
  const std::size_t d = schema.size();
  const std::size_t kk = std::min(k, reference.size());
  std::vector<double> ref(reference.size() * d);
  for (std::size_t r = 0; r < reference.size(); ++r) {
    encode_into(schema, reference.rows[r], std::span<double>(ref.data() + r * d, d));
    for (const auto c : ignored) ref[r * d + c] = 0.0;
  }
  const int favorable = schema.favorable_label();
  std::vector<int> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> q(d);
    std::vector<std::pair<double, std::size_t>> best;
    for (std::size_t i = begin; i < end; ++i) {
      encode_into(schema, queries[i], q);
      for (const auto c : ignored) q[c] = 0.0;
      best.clear();
      for (std::size_t r = 0; r < reference.size(); ++r) {
        const double* o = ref.data() + r * d;
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) sq += (q[c] - o[c]) * (q[c] - o[c]);
        const std::pair<double, std::size_t> cand{sq, r};
        if (best.size() < kk) {
          best.push_back(cand);
          std::push_heap(best.begin(), best.end());
        } else if (cand < best.front()) {
          std::pop_heap(best.begin(), best.end());
          best.back() = cand;
          std::push_heap(best.begin(), best.end());
        }
      }
      std::size_t ones = 0;
      for (const auto& [dist, r] : best) ones += reference.labels[r] == 1 ? 1 : 0;
      const std::size_t zeros = best.size() - ones;
      out[i] = ones > zeros ? 1 : zeros > ones ? 0 : favorable;
    }
  });
  return out;
}

json strip_timing(json report) {
  if (report.is_object()) {
    report.erase("timing");
    for (auto& [key, value] : report.items()) value = strip_timing(value);
  } else if (report.is_array()) {
    for (auto& v : report) v = strip_timing(v);
  }
  return report;
}

json cmd_fit_gen(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto train = load_train(cfg);
  prepare_out(cfg);
  const auto model = fit_copula(train);
  const auto path = cfg.generator.empty() ? cfg.out / "generator.json" : cfg.generator;
  model.save(path);

  const CopulaGenerator gen(model);
  const auto latents = sample_latents(cfg.metrics.calibration_rows, gen.latent_dim(), derive_seed(cfg.seed, "calibration"));
  Dataset synthetic{train.schema, gen.decode_batch(latents), {}};
  synthetic.labels.assign(synthetic.size(), 0);
  const auto calibration = atn(synthetic, train);
  json report = {{"generator", path.string()},
                 {"latent_dim", gen.latent_dim()},
                 {"ridge", model.ridge},
                 {"calibration_rows", cfg.metrics.calibration_rows},
                 {"calibration", calibration.to_json()},
                 {"timing", {{"elapsed_secs", seconds_since(start)}}}};
  write_json(cfg.out / "fit_gen.json", report);
  return report;
}

json cmd_train_model(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto train = load_train(cfg);
  std::optional<Dataset> test;
  if (!cfg.test_dataset.empty()) test = load_test(cfg);
  prepare_out(cfg);
  const auto result = train_mlp(train, cfg.mlp);
  const auto path = cfg.model.empty() ? cfg.out / "model.json" : cfg.model;
  result.model->save(path);
  json report = {{"model", path.string()},
                 {"hidden", cfg.mlp.hidden_sizes},
                 {"epochs", cfg.mlp.epochs},
                 {"parameter_count", result.model->parameter_count()},
                 {"parameter_hash", result.model->parameter_hash()},
                 {"train_accuracy", result.train_accuracy},
                 {"test_accuracy", test ? json(accuracy(*result.model, *test)) : json(nullptr)},
                 {"timing", {{"elapsed_secs", seconds_since(start)}}}};
  write_json(cfg.out / "train_model.json", report);
  return report;
}

json cmd_approximate(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto schema = run_schema(cfg);
  const auto model = load_model(cfg, schema);
  const auto gen = load_generator(cfg, schema);
  prepare_out(cfg);

  const auto init = sample_latents(cfg.aux.n_init, gen->latent_dim(), cfg.aux.seed);
  const auto init_rows = gen->decode_batch(init);
  const auto init_preds = model->predict_batch(init_rows);
  const auto aux = build_aux(*gen, *model, init, cfg.aux);
  const auto fit_start = Clock::now();
  const auto boundary = fit_boundary(aux, cfg.svm);
  const double fit_secs = seconds_since(fit_start);
  boundary.save(cfg.boundary_path());

  std::vector<int> init_labels;
  init_labels.reserve(init_preds.size());
  for (const auto& p : init_preds) init_labels.push_back(p.label);

  const auto heldout = sample_latents(cfg.metrics.heldout_latents, gen->latent_dim(), derive_seed(cfg.seed, "heldout"));
  const auto heldout_preds = model->predict_batch(gen->decode_batch(heldout));
  std::vector<int> heldout_labels;
  for (const auto& p : heldout_preds) heldout_labels.push_back(p.label);

  std::size_t init_ones = 0;
  for (const int l : init_labels) init_ones += static_cast<std::size_t>(l);

  json report = {
      {"boundary", cfg.boundary_path().string()},
      {"aux",
       {{"n_init", cfg.aux.n_init},
        {"epsilon", cfg.aux.epsilon},
        {"per_class", cfg.aux.per_class},
        {"predicted_ones", init_ones},
        {"filtered_counts", {aux.filtered_counts[0], aux.filtered_counts[1]}},
        {"min_retained_score", aux.min_retained_score}}},
      {"w_norm", boundary.norm()},
      {"svm_objective", svm_objective(boundary.w(), boundary.b(), aux, cfg.svm.reg)},
      {"auc",
       {{"train", boundary_auc(boundary, aux.latents, aux.labels)},
        {"entire", boundary_auc(boundary, init, init_labels)},
        {"heldout", boundary_auc(boundary, heldout, heldout_labels)}}},
      {"heldout_latents", cfg.metrics.heldout_latents},
      {"timing", {{"elapsed_secs", seconds_since(start)}, {"fit_secs", fit_secs}}}};
  write_json(cfg.out / "fitness.json", report);
  return report;
}

json cmd_probe(const RunConfig& cfg) {
  const auto schema = run_schema(cfg);
  const auto model = load_model(cfg, schema);
  const auto gen = load_generator(cfg, schema);
  require_file(cfg.boundary_path(), "boundary");
  const auto boundary = SurrogateBoundary::load(cfg.boundary_path());
  prepare_out(cfg);
  const auto result = run_probe(cfg, *gen, *model, boundary, schema);
  write_d_idi(cfg.d_idi_path(), schema, result.pairs);
  auto report = probe_report(result, cfg, "limi");
  report["d_idi"] = cfg.d_idi_path().string();
  report["reuse_init"] = cfg.reuse_init;
  write_json(cfg.out / "probe_stats.json", report);
  return report;
}

json cmd_baseline_random(const RunConfig& cfg) {
  const auto schema = run_schema(cfg);
  const auto model = load_model(cfg, schema);
  prepare_out(cfg);
  const auto result = run_random(*model, schema, cfg.probe);
  const auto path = cfg.out / "random_d_idi.csv";
  write_d_idi(path, schema, result.pairs);
  auto report = probe_report(result, cfg, "random");
  report["d_idi"] = path.string();
  write_json(cfg.out / "random_stats.json", report);
  return report;
}

json cmd_evaluate(const RunConfig& cfg, const fs::path& d_idi_path) {
  const auto start = Clock::now();
  const auto train = load_train(cfg);
  const auto& schema = train.schema;
  const auto model = load_model(cfg, schema);
  require_file(d_idi_path, "D_idi");
  const auto d_idi = load_csv(d_idi_path, schema);
  if (d_idi.empty()) throw Error(ErrorCode::EmptySample, "D_idi '" + d_idi_path.string() + "' is empty");
  prepare_out(cfg);

  const auto naturalness = atn_repeated(d_idi, train, cfg.metrics.atn_repeats, derive_seed(cfg.seed, "atn"));
  json report = {{"d_idi", d_idi_path.string()},
                 {"d_idi_size", d_idi.size()},
                 {"naturalness", naturalness.to_json()},
                 {"ann_distance", ann_distance(train, d_idi)},
                 {"fairness", fairness_json(*model, schema, train, cfg)},
                 {"timing", {{"elapsed_secs", seconds_since(start)}}}};
  write_json(cfg.out / ("evaluation_" + d_idi_path.stem().string() + ".json"), report);
  return report;
}

json cmd_retrain(const RunConfig& cfg, const fs::path& d_idi_path) {
  const auto start = Clock::now();
  const auto train = load_train(cfg);
  const auto test = load_test(cfg);
  const auto& schema = train.schema;
  const auto model = load_model(cfg, schema);
  require_file(d_idi_path, "D_idi");
  const auto d_idi = load_csv(d_idi_path, schema);
  prepare_out(cfg);

  std::vector<Row> unique;
  std::set<Row> seen;
  for (const auto& r : d_idi.rows) {
    if (seen.insert(r).second) unique.push_back(r);
  }
  const auto need = static_cast<std::size_t>(std::ceil(cfg.retrain.fraction * static_cast<double>(train.size())));
  if (unique.size() < need) {
    throw Error(ErrorCode::InsufficientInstances, "retraining needs " + std::to_string(need) +
                                                      " unique discriminatory instances, D_idi has " +
                                                      std::to_string(unique.size()));
  }
  std::vector<std::size_t> ignored;
  if (cfg.retrain.exclude_protected) ignored = schema.protected_indices();

  // Labels do not depend on the draw, so every unique instance is labelled once.
  const auto label_start = Clock::now();
  const auto labels = knn_majority_labels(train, unique, cfg.retrain.k, ignored);
  const double label_secs = seconds_since(label_start);

  const std::array<const char*, 4> keys{"if_r", "if_o", "spd", "aod"};
  auto summary = [&](const Classifier& m) {
    return json{{"accuracy", accuracy(m, test)}, {"fairness", fairness_json(m, schema, train, cfg)}};
  };
  json runs = json::array();
  std::mt19937_64 rng(derive_seed(cfg.seed, "retrain"));
  std::vector<std::size_t> order(unique.size());
  double train_secs = 0.0;
  for (std::size_t rep = 0; rep < cfg.retrain.repeats; ++rep) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Dataset augment{schema, {}, {}};
    std::size_t favorable = 0;
    for (std::size_t i = 0; augment.size() < need; ++i) {
      const auto idx = order[i];
      augment.rows.push_back(unique[idx]);
      augment.labels.push_back(labels[idx]);
      if (cfg.retrain.include_variants) {
        for (auto& v : protected_variants(schema, unique[idx])) {
          if (augment.size() == need) break;
          augment.rows.push_back(std::move(v));
          augment.labels.push_back(labels[idx]);
        }
      }
    }
    for (const int l : augment.labels) favorable += static_cast<std::size_t>(l);
    MlpConfig mlp = cfg.mlp;
    if (rep > 0) mlp.seed = derive_seed(cfg.mlp.seed, "repeat-" + std::to_string(rep));

    const auto t0 = Clock::now();
    ClassifierHandle before = model;
    if (rep > 0) before = train_mlp(train, mlp).model;
    const auto after = retrain(train, augment, mlp).model;
    train_secs += seconds_since(t0);
    if (rep == 0) after->save(cfg.out / "retrained_model.json");
    runs.push_back({{"repeat", rep},
                    {"before_model", rep == 0 ? "target" : "trained"},
                    {"added_favorable", favorable},
                    {"before", summary(*before)},
                    {"after", summary(*after)}});
  }

  auto mean_of = [&](const char* side) {
    json m = json::object();
    double acc = 0.0;
    for (const auto& r : runs) acc += r[side]["accuracy"].get<double>();
    m["accuracy"] = acc / static_cast<double>(runs.size());
    for (const auto* key : keys) {
      double sum = 0.0;
      bool defined = true;
      for (const auto& r : runs) {
        const auto& v = r[side]["fairness"][key];
        if (v.is_null()) defined = false;
        else sum += v.get<double>();
      }
      m[key] = defined ? json(sum / static_cast<double>(runs.size())) : json(nullptr);
    }
    return m;
  };
  const auto before_mean = mean_of("before");
  const auto after_mean = mean_of("after");
  json report = {{"label_rule", "knn_majority"},
                 {"note", "augmentation labels come from a k-nearest-neighbour vote over the training set"},
                 {"k", cfg.retrain.k},
                 {"exclude_protected", cfg.retrain.exclude_protected},
                 {"include_variants", cfg.retrain.include_variants},
                 {"fraction", cfg.retrain.fraction},
                 {"repeats", cfg.retrain.repeats},
                 {"added", need},
                 {"retrained_model", (cfg.out / "retrained_model.json").string()},
                 {"runs", runs},
                 {"mean", {{"before", before_mean}, {"after", after_mean}}},
                 {"accuracy_drop", before_mean["accuracy"].get<double>() - after_mean["accuracy"].get<double>()},
                 {"if_r_change", after_mean["if_r"].get<double>() - before_mean["if_r"].get<double>()},
                 {"timing",
                  {{"elapsed_secs", seconds_since(start)}, {"label_secs", label_secs}, {"train_secs", train_secs}}}};
  write_json(cfg.out / "retrain.json", report);
  return report;
}

json cmd_ablate_lambda(const RunConfig& cfg, const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw Error(ErrorCode::InvalidConfig, "lambda grid is empty");
  const auto schema = run_schema(cfg);
  const auto model = load_model(cfg, schema);
  const auto gen = load_generator(cfg, schema);
  require_file(cfg.boundary_path(), "boundary");
  const auto boundary = SurrogateBoundary::load(cfg.boundary_path());
  prepare_out(cfg);

  json rows = json::array();
  json timing = json::array();
  for (const double lambda : lambdas) {
    RunConfig c = cfg;
    c.probe.lambda = lambda;
    c.probe.validate();
    const auto result = run_probe(c, *gen, *model, boundary, schema);
    auto r = probe_report(result, c, "limi");
    timing.push_back({{"lambda", lambda}, {"elapsed_secs", result.stats.elapsed_secs}, {"egs", result.stats.egs}});
    r.erase("timing");
    rows.push_back(r);
  }
  json report = {{"lambdas", lambdas}, {"rows", rows}, {"timing", timing}};
  write_json(cfg.out / "ablation.json", report);
  return report;
}

}  // namespace limi

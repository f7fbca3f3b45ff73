#include "limi/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "limi/error.hpp"
#include "limi/parallel.hpp"
#include "limi/probe.hpp"

namespace limi {

namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "similarity metric needs non-empty samples");
}

std::map<double, double> frequencies(std::span<const double> values) {
  std::map<double, double> f;
  for (double v : values) f[v] += 1.0;
  for (auto& [k, c] : f) c /= static_cast<double>(values.size());
  return f;
}

std::vector<int> bin_codes(const ColumnSpec& spec, std::span<const double> reference, std::span<const double> values) {
  std::vector<int> out(values.size());
  if (spec.is_categorical()) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<int>(values[i]);
    return out;
  }
  const auto [mn, mx] = std::minmax_element(reference.begin(), reference.end());
  const double lo = *mn;
  const double width = (*mx - *mn) / 10.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int bin = width > 0.0 ? static_cast<int>(std::floor((values[i] - lo) / width)) : 0;
    out[i] = std::clamp(bin, 0, 9);
  }
  return out;
}

Dataset subsample(const Dataset& d, std::size_t m, std::mt19937_64& rng) {
  if (m >= d.size()) return d;
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  Dataset out{d.schema, {}, {}};
  out.rows.reserve(m);
  out.labels.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.rows.push_back(d.rows[idx[i]]);
    out.labels.push_back(d.labels[idx[i]]);
  }
  return out;
}

GroupRates finalize(GroupRates g, std::size_t predicted_favorable, std::size_t true_pos, std::size_t false_pos) {
  g.positive_rate = static_cast<double>(predicted_favorable) / static_cast<double>(g.count);
  g.tpr = g.positives > 0 ? static_cast<double>(true_pos) / static_cast<double>(g.positives) : 0.0;
  g.fpr = g.negatives > 0 ? static_cast<double>(false_pos) / static_cast<double>(g.negatives) : 0.0;
  return g;
}

nlohmann::json to_json(const GroupRates& g) {
  return {{"count", g.count}, {"positives", g.positives}, {"negatives", g.negatives},
          {"positive_rate", g.positive_rate}, {"tpr", g.tpr}, {"fpr", g.fpr}};
}

}  // namespace

double ks_complement(std::span<const double> real, std::span<const double> syn) {
  require_nonempty(real, syn);
  std::vector<double> a(real.begin(), real.end());
  std::vector<double> b(syn.begin(), syn.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double sup = 0.0;
  while (i < a.size() || j < b.size()) {
    double t = std::numeric_limits<double>::infinity();
    if (i < a.size()) t = a[i];
    if (j < b.size()) t = std::min(t, b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    sup = std::max(sup, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return 1.0 - sup;
}

double tv_complement(std::span<const double> real, std::span<const double> syn) {
  require_nonempty(real, syn);
  auto fr = frequencies(real);
  const auto fs = frequencies(syn);
  for (const auto& [k, v] : fs) fr.try_emplace(k, 0.0);
  double total = 0.0;
  for (const auto& [k, p] : fr) {
    const auto it = fs.find(k);
    total += std::fabs(p - (it == fs.end() ? 0.0 : it->second));
  }
  return 1.0 - 0.5 * total;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || a.size() != b.size()) {
    throw Error(ErrorCode::EmptySample, "Pearson correlation needs two equally long columns of at least 2 rows");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(ErrorCode::ConstantColumn, "Pearson correlation of a constant column");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson_similarity(std::span<const double> real_a, std::span<const double> real_b,
                          std::span<const double> syn_a, std::span<const double> syn_b) {
  return 1.0 - std::fabs(pearson(real_a, real_b) - pearson(syn_a, syn_b)) / 2.0;
}

double contingency_similarity(const ColumnSpec& col_a, const ColumnSpec& col_b, std::span<const double> real_a,
                              std::span<const double> real_b, std::span<const double> syn_a,
                              std::span<const double> syn_b) {
  require_nonempty(real_a, syn_a);
  const auto ra = bin_codes(col_a, real_a, real_a);
  const auto rb = bin_codes(col_b, real_b, real_b);
  const auto sa = bin_codes(col_a, real_a, syn_a);
  const auto sb = bin_codes(col_b, real_b, syn_b);

  std::map<std::pair<int, int>, std::pair<double, double>> cells;
  for (std::size_t i = 0; i < ra.size(); ++i) cells[{ra[i], rb[i]}].first += 1.0 / static_cast<double>(ra.size());
  for (std::size_t i = 0; i < sa.size(); ++i) cells[{sa[i], sb[i]}].second += 1.0 / static_cast<double>(sa.size());
  double total = 0.0;
  for (const auto& [cell, p] : cells) total += std::fabs(p.first - p.second);
  return 1.0 - 0.5 * total;
}

nlohmann::json NaturalnessReport::to_json() const {
  nlohmann::json shapes_j = nlohmann::json::array();
  for (const auto& s : shapes) shapes_j.push_back({{"column", s.column}, {"metric", s.metric}, {"score", s.score}});
  nlohmann::json trends_j = nlohmann::json::array();
  for (const auto& t : trends) {
    trends_j.push_back({{"columns", {t.column_a, t.column_b}}, {"metric", t.metric}, {"score", t.score}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& [a, b] : skipped_pairs) skipped.push_back({a, b});
  return {{"atn", atn},           {"shape_mean", shape_mean}, {"trend_mean", trend_mean}, {"repeats", repeats},
          {"shapes", shapes_j},   {"trends", trends_j},       {"skipped_pairs", skipped}};
}

NaturalnessReport atn(const Dataset& generated, const Dataset& original) {
  if (generated.empty() || original.empty()) throw Error(ErrorCode::EmptySample, "ATN needs non-empty tables");
  if (!(generated.schema.columns() == original.schema.columns())) {
    throw Error(ErrorCode::InvalidSchema, "ATN compares tables with different schemas");
  }
  const auto& schema = original.schema;
  const std::size_t d = schema.size();
  std::vector<std::vector<double>> gen_cols(d);
  std::vector<std::vector<double>> orig_cols(d);
  for (std::size_t c = 0; c < d; ++c) {
    gen_cols[c] = generated.column(c);
    orig_cols[c] = original.column(c);
  }

  NaturalnessReport report;
  double shape_sum = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const auto& spec = schema.column(c);
    ColumnShapeScore s{spec.name, spec.is_categorical() ? "tv" : "ks", 0.0};
    s.score = spec.is_categorical() ? tv_complement(orig_cols[c], gen_cols[c]) : ks_complement(orig_cols[c], gen_cols[c]);
    shape_sum += s.score;
    report.shapes.push_back(std::move(s));
  }
  report.shape_mean = shape_sum / static_cast<double>(d);

  double trend_sum = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      const auto& ca = schema.column(a);
      const auto& cb = schema.column(b);
      PairTrendScore t{ca.name, cb.name, "", 0.0};
      if (!ca.is_categorical() && !cb.is_categorical()) {
        t.metric = "pearson";
        try {
          t.score = pearson_similarity(orig_cols[a], orig_cols[b], gen_cols[a], gen_cols[b]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ConstantColumn) throw;
          report.skipped_pairs.emplace_back(ca.name, cb.name);
          continue;
        }
      } else {
        t.metric = "contingency";
        t.score = contingency_similarity(ca, cb, orig_cols[a], orig_cols[b], gen_cols[a], gen_cols[b]);
      }
      trend_sum += t.score;
      report.trends.push_back(std::move(t));
    }
  }
  report.trend_mean = report.trends.empty() ? 1.0 : trend_sum / static_cast<double>(report.trends.size());
  report.atn = (report.shape_mean + report.trend_mean) / 2.0;
  return report;
}

NaturalnessReport atn_repeated(const Dataset& generated, const Dataset& original, std::size_t repeats,
                               std::uint64_t seed) {
  if (repeats == 0) throw Error(ErrorCode::InvalidConfig, "ATN needs at least one repeat");
  if (generated.empty() || original.empty()) throw Error(ErrorCode::EmptySample, "ATN needs non-empty tables");
  const std::size_t m = std::min(generated.size(), original.size());
  std::mt19937_64 rng(seed);
  NaturalnessReport mean;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto g = subsample(generated, m, rng);
    const auto o = subsample(original, m, rng);
    const auto rep = atn(g, o);
    if (r == 0) {
      mean = rep;
    } else {
      for (std::size_t c = 0; c < mean.shapes.size(); ++c) mean.shapes[c].score += rep.shapes[c].score;
      // Trend lists can differ between repeats when a subsample makes a column constant.
      for (const auto& t : rep.trends) {
        const auto it = std::find_if(mean.trends.begin(), mean.trends.end(), [&](const PairTrendScore& x) {
          return x.column_a == t.column_a && x.column_b == t.column_b;
        });
        if (it != mean.trends.end()) it->score += t.score;
      }
      mean.shape_mean += rep.shape_mean;
      mean.trend_mean += rep.trend_mean;
      mean.atn += rep.atn;
      for (const auto& p : rep.skipped_pairs) {
        if (std::find(mean.skipped_pairs.begin(), mean.skipped_pairs.end(), p) == mean.skipped_pairs.end()) {
          mean.skipped_pairs.push_back(p);
        }
      }
    }
  }
  const double k = static_cast<double>(repeats);
  for (auto& s : mean.shapes) s.score /= k;
  for (auto& t : mean.trends) t.score /= k;
  mean.shape_mean /= k;
  mean.trend_mean /= k;
  mean.atn /= k;
  mean.repeats = repeats;
  return mean;
}

double ann_distance(const Dataset& original, const Dataset& generated) {
  if (original.empty() || generated.empty()) throw Error(ErrorCode::EmptySample, "ANN distance needs non-empty tables");
  const auto& schema = original.schema;
  const std::size_t d = schema.size();
  std::vector<double> orig(original.size() * d);
  for (std::size_t r = 0; r < original.size(); ++r) {
    encode_into(schema, original.rows[r], std::span<double>(orig.data() + r * d, d));
  }
  std::vector<double> nearest(generated.size());
  parallel_for(generated.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> g(d);
    for (std::size_t i = begin; i < end; ++i) {
      encode_into(schema, generated.rows[i], g);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < original.size(); ++r) {
        const double* o = orig.data() + r * d;
        double sq = 0.0;
        for (std::size_t c = 0; c < d && sq < best; ++c) sq += (g[c] - o[c]) * (g[c] - o[c]);
        best = std::min(best, sq);
      }
      nearest[i] = std::sqrt(best);
    }
  });
  double total = 0.0;
  for (const double v : nearest) total += v;
  return total / static_cast<double>(generated.size());
}

double egs(std::size_t found, double elapsed_secs) {
  if (!(elapsed_secs > 0.0)) throw Error(ErrorCode::ZeroElapsed, "generation speed needs positive elapsed time");
  return static_cast<double>(found) / elapsed_secs;
}

double if_r(const Classifier& model, const Schema& schema, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "IF_r needs at least one sample");
  UniformRowStream stream(schema, seed);
  std::size_t hits = 0;
  for (std::size_t done = 0; done < n;) {
    const std::size_t chunk = std::min<std::size_t>(4096, n - done);
    const auto rows = stream.next(chunk);
    for (const auto& p : find_discriminatory(model, schema, rows)) hits += p ? 1 : 0;
    done += chunk;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double if_o(const Classifier& model, const Schema& schema, const Dataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::EmptySample, "IF_o needs a non-empty dataset");
  std::size_t hits = 0;
  for (const auto& p : find_discriminatory(model, schema, dataset.rows)) hits += p ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

GroupFairness group_fairness(const Classifier& model, const Dataset& dataset, std::size_t protected_col) {
  const auto& spec = dataset.schema.column(protected_col);
  const int fav = dataset.schema.favorable_label();
  const auto preds = model.predict_batch(dataset.rows);
  std::array<GroupRates, 2> g{};  // 0 unprivileged, 1 privileged
  std::array<std::size_t, 2> predicted{0, 0}, tp{0, 0}, fp{0, 0};
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t k = spec.is_privileged(dataset.rows[i][protected_col]) ? 1 : 0;
    const bool pred_fav = preds[i].label == fav;
    const bool true_fav = dataset.labels[i] == fav;
    ++g[k].count;
    predicted[k] += pred_fav ? 1 : 0;
    if (true_fav) {
      ++g[k].positives;
      tp[k] += pred_fav ? 1 : 0;
    } else {
      ++g[k].negatives;
      fp[k] += pred_fav ? 1 : 0;
    }
  }
  if (g[0].count == 0 || g[1].count == 0) {
    throw Error(ErrorCode::EmptyGroup, "column '" + spec.name + "' has an empty privileged or unprivileged group");
  }
  GroupFairness out;
  out.unprivileged = finalize(g[0], predicted[0], tp[0], fp[0]);
  out.privileged = finalize(g[1], predicted[1], tp[1], fp[1]);
  out.spd = std::fabs(out.unprivileged.positive_rate - out.privileged.positive_rate);
  out.aod_defined = g[0].positives > 0 && g[0].negatives > 0 && g[1].positives > 0 && g[1].negatives > 0;
  if (out.aod_defined) {
    out.aod = 0.5 * (std::fabs(out.unprivileged.fpr - out.privileged.fpr) +
                     std::fabs(out.unprivileged.tpr - out.privileged.tpr));
  }
  return out;
}

double spd(const Classifier& model, const Dataset& dataset, std::size_t protected_col) {
  return group_fairness(model, dataset, protected_col).spd;
}

double aod(const Classifier& model, const Dataset& dataset, std::size_t protected_col) {
  const auto g = group_fairness(model, dataset, protected_col);
  if (!g.aod_defined) {
    throw Error(ErrorCode::UndefinedRate, "a group lacks ground-truth positives or negatives");
  }
  return g.aod;
}

nlohmann::json FairnessReport::to_json() const {
  return {{"protected_column", protected_column},
          {"if_r", if_r},
          {"if_o", if_o},
          {"spd", spd},
          {"aod", aod},
          {"aod_defined", groups.aod_defined},
          {"privileged", limi::to_json(groups.privileged)},
          {"unprivileged", limi::to_json(groups.unprivileged)}};
}

FairnessReport fairness_report(const Classifier& model, const Schema& schema, const Dataset& dataset,
                               std::size_t protected_col, std::size_t if_r_samples, std::uint64_t seed) {
  FairnessReport r;
  r.protected_column = schema.column(protected_col).name;
  r.if_r = if_r(model, schema, if_r_samples, seed);
  r.if_o = if_o(model, schema, dataset);
  r.groups = group_fairness(model, dataset, protected_col);
  r.spd = r.groups.spd;
  r.aod = r.groups.aod;
  return r;
}

}  // namespace limi

#include "limi/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "limi/error.hpp"

namespace limi {

SurrogateBoundary::SurrogateBoundary(std::vector<double> w, double b) : w_(std::move(w)), b_(b), norm_(0.0) {
  double sq = 0.0;
  for (double v : w_) sq += v * v;
  norm_ = std::sqrt(sq);
  if (!(norm_ > 0.0) || !std::isfinite(norm_) || !std::isfinite(b_)) {
    throw Error(ErrorCode::InvalidConfig, "surrogate boundary needs a finite nonzero normal vector");
  }
}

std::vector<double> SurrogateBoundary::unit_normal() const {
  std::vector<double> u(w_);
  for (auto& v : u) v /= norm_;
  return u;
}

nlohmann::json SurrogateBoundary::to_json() const { return {{"w", w_}, {"b", b_}}; }

SurrogateBoundary SurrogateBoundary::from_json(const nlohmann::json& j) {
  try {
    return SurrogateBoundary(j.at("w").get<std::vector<double>>(), j.at("b").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad boundary: ") + e.what());
  }
}

void SurrogateBoundary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << to_json().dump(2) << '\n';
}

SurrogateBoundary SurrogateBoundary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return from_json(j);
}

double distance(const SurrogateBoundary& boundary, std::span<const double> z) {
  const auto& w = boundary.w();
  double dot = boundary.b();
  for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * z[i];
  return dot / boundary.norm();
}

void AuxConfig::validate() const {
  if (!(epsilon >= 0.5 && epsilon < 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must lie in [0.5, 1)");
  if (per_class < 1) throw Error(ErrorCode::InvalidConfig, "per_class must be at least 1");
  if (n_init < 1) throw Error(ErrorCode::InvalidConfig, "n_init must be at least 1");
}

AuxDataset build_aux(const Generator& gen, const Classifier& model, const AuxConfig& cfg) {
  cfg.validate();
  const auto latents = sample_latents(cfg.n_init, gen.latent_dim(), cfg.seed);
  return build_aux(gen, model, latents, cfg);
}

AuxDataset build_aux(const Generator& gen, const Classifier& model, std::span<const LatentVector> latents,
                     const AuxConfig& cfg) {
  cfg.validate();
  const auto rows = gen.decode_batch(latents);
  const auto preds = model.predict_batch(rows);

  std::vector<std::size_t> order(latents.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });

  std::array<std::vector<std::size_t>, 2> by_label;
  for (auto idx : order) {
    if (preds[idx].score < cfg.epsilon) break;
    by_label[static_cast<std::size_t>(preds[idx].label)].push_back(idx);
  }

  AuxDataset aux;
  aux.filtered_counts = {by_label[0].size(), by_label[1].size()};
  if (by_label[0].empty() || by_label[1].empty()) {
    throw Error(ErrorCode::BoundaryUnlearnable, "after the confidence filter label 0 has " +
                                                    std::to_string(by_label[0].size()) + " samples and label 1 has " +
                                                    std::to_string(by_label[1].size()));
  }

  std::mt19937_64 rng(cfg.seed ^ 0xa0761d6478bd642full);
  aux.latents.reserve(2 * cfg.per_class);
  aux.labels.reserve(2 * cfg.per_class);
  for (int label = 0; label < 2; ++label) {
    auto& members = by_label[static_cast<std::size_t>(label)];
    if (members.size() > cfg.per_class) {
      if (cfg.truncation == AuxConfig::Truncation::Random) {
        // Partial Fisher-Yates: a seeded uniform subset, kept in confidence order.
        for (std::size_t i = 0; i < cfg.per_class; ++i) {
          std::uniform_int_distribution<std::size_t> swap_with(i, members.size() - 1);
          std::swap(members[i], members[swap_with(rng)]);
        }
        members.resize(cfg.per_class);
        std::stable_sort(members.begin(), members.end(),
                         [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
      } else {
        members.resize(cfg.per_class);
      }
    }
    for (auto idx : members) aux.min_retained_score = std::min(aux.min_retained_score, preds[idx].score);
    const std::size_t original = members.size();
    std::uniform_int_distribution<std::size_t> pick(0, original - 1);
    while (members.size() < cfg.per_class) members.push_back(members[pick(rng)]);
    for (auto idx : members) {
      aux.latents.push_back(latents[idx]);
      aux.labels.push_back(label);
    }
  }
  return aux;
}

void SvmConfig::validate() const {
  if (!(reg > 0.0)) throw Error(ErrorCode::InvalidConfig, "SVM regularization must be positive");
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "SVM needs at least one epoch");
}

SurrogateBoundary fit_boundary(const AuxDataset& aux, const SvmConfig& cfg) {
  cfg.validate();
  const auto ones = std::count(aux.labels.begin(), aux.labels.end(), 1);
  if (aux.latents.empty() || ones == 0 || static_cast<std::size_t>(ones) == aux.labels.size()) {
    throw Error(ErrorCode::OneClassSample, "surrogate fit needs both labels");
  }
  const std::size_t dim = aux.latents.front().size();
  // theta = (w, b); the bias is the weight of a constant feature 1.
  std::vector<double> theta(dim + 1, 0.0);
  const double radius = 1.0 / std::sqrt(cfg.reg);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(aux.latents.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto idx : order) {
      ++t;
      const double eta = 1.0 / (cfg.reg * static_cast<double>(t));
      const auto& z = aux.latents[idx];
      const double y = aux.labels[idx] == 1 ? 1.0 : -1.0;
      double margin = theta[dim];
      for (std::size_t i = 0; i < dim; ++i) margin += theta[i] * z[i];
      margin *= y;
      const double shrink = 1.0 - eta * cfg.reg;
      for (auto& v : theta) v *= shrink;
      if (margin < 1.0) {
        for (std::size_t i = 0; i < dim; ++i) theta[i] += eta * y * z[i];
        theta[dim] += eta * y;
      }
      double sq = 0.0;
      for (double v : theta) sq += v * v;
      if (sq > radius * radius) {
        const double scale = radius / std::sqrt(sq);
        for (auto& v : theta) v *= scale;
      }
    }
  }
  const double b = theta[dim];
  theta.pop_back();
  return SurrogateBoundary(std::move(theta), b);
}

double svm_objective(const std::vector<double>& w, double b, const AuxDataset& aux, double reg) {
  double sq = b * b;
  for (double v : w) sq += v * v;
  double hinge = 0.0;
  for (std::size_t k = 0; k < aux.latents.size(); ++k) {
    double m = b;
    for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * aux.latents[k][i];
    const double y = aux.labels[k] == 1 ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * m);
  }
  return 0.5 * reg * sq + hinge / static_cast<double>(aux.latents.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1 ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::OneClassSample, "AUC needs both labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double boundary_auc(const SurrogateBoundary& boundary, std::span<const LatentVector> latents,
                    std::span<const int> labels) {
  std::vector<double> scores;
  scores.reserve(latents.size());
  for (const auto& z : latents) scores.push_back(distance(boundary, z));
  return auc(scores, labels);
}

}  // namespace limi

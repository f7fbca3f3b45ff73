#include "limi/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "limi/error.hpp"
#include "limi/normal.hpp"

namespace limi {

std::vector<Row> Generator::decode_batch(std::span<const LatentVector> zs) const {
  std::vector<Row> out;
  out.reserve(zs.size());
  for (const auto& z : zs) out.push_back(decode(z));
  return out;
}

LatentStream::LatentStream(std::size_t latent_dim, std::uint64_t seed) : dim_(latent_dim), rng_(seed) {}

std::vector<LatentVector> LatentStream::next(std::size_t n) {
  std::vector<LatentVector> out(n, LatentVector(dim_));
  for (auto& z : out) {
    for (auto& v : z) v = normal_(rng_);
  }
  return out;
}

std::vector<LatentVector> sample_latents(std::size_t n, std::size_t latent_dim, std::uint64_t seed) {
  return LatentStream(latent_dim, seed).next(n);
}

double numeric_inverse_cdf(const NumericMarginal& marginal, double u) {
  const auto& s = marginal.sorted;
  const double n = static_cast<double>(s.size());
  const double pos = std::clamp(u * n - 0.5, 0.0, n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double t = pos - static_cast<double>(lo);
  if (s[lo] == s[hi]) return s[lo];
  return s[lo] + t * (s[hi] - s[lo]);
}

std::size_t categorical_inverse_cdf(const CategoricalMarginal& marginal, double u) {
  const auto& c = marginal.cumulative;
  const auto it = std::upper_bound(c.begin(), c.end(), u);
  if (it == c.end()) return c.size() - 1;
  return static_cast<std::size_t>(it - c.begin());
}

CopulaModel fit_copula(const Dataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::EmptySample, "cannot fit a copula to an empty dataset");
  const auto& schema = dataset.schema;
  const std::size_t n = dataset.size();
  const std::size_t d = schema.size();
  const double nd = static_cast<double>(n);

  CopulaModel model;
  model.schema = schema;
  model.numeric.resize(d);
  model.categorical.resize(d);
  Eigen::MatrixXd scores(n, d);

  for (std::size_t c = 0; c < d; ++c) {
    const auto& spec = schema.column(c);
    auto column = dataset.column(c);
    auto sorted = column;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) {
      throw Error(ErrorCode::DegenerateColumn, "column '" + spec.name + "' is constant");
    }
    // Normal score of a value: quantile at the midpoint of its cumulative interval,
    // which equals (midrank - 0.5) / n for tied numeric values.
    for (std::size_t r = 0; r < n; ++r) {
      const auto lo = std::lower_bound(sorted.begin(), sorted.end(), column[r]) - sorted.begin();
      const auto hi = std::upper_bound(sorted.begin(), sorted.end(), column[r]) - sorted.begin();
      scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          normal_quantile((static_cast<double>(lo) + static_cast<double>(hi)) / 2.0 / nd);
    }
    if (spec.is_categorical()) {
      std::vector<double> counts(spec.categories.size(), 0.0);
      for (double v : column) counts[static_cast<std::size_t>(v)] += 1.0;
      auto& cum = model.categorical[c].cumulative;
      cum.resize(counts.size());
      double acc = 0.0;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        acc += counts[k];
        cum[k] = acc / nd;
      }
      cum.back() = 1.0;
    } else {
      model.numeric[c].sorted = std::move(sorted);
    }
  }

  const Eigen::RowVectorXd mean = scores.colwise().mean();
  const Eigen::MatrixXd centered = scores.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / nd;
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  Eigen::MatrixXd corr = cov.array() / (sd * sd.transpose()).array();
  corr.diagonal().setOnes();

  double ridge = 0.0;
  for (double delta = 1e-6;; delta *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(corr + ridge * Eigen::MatrixXd::Identity(d, d));
    if (llt.info() == Eigen::Success) {
      model.factor = llt.matrixL();
      break;
    }
    ridge = delta;
  }
  model.ridge = ridge;
  return model;
}

CopulaGenerator::CopulaGenerator(CopulaModel model) : model_(std::move(model)) {}

Row CopulaGenerator::decode(std::span<const double> z) const {
  const std::size_t d = latent_dim();
  if (z.size() != d) {
    throw Error(ErrorCode::InvalidConfig, "latent of size " + std::to_string(z.size()) + ", expected " +
                                              std::to_string(d));
  }
  const auto& schema = model_.schema;
  Row row;
  row.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double x = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      x += model_.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
    }
    const double u = normal_cdf(x);
    const auto& spec = schema.column(i);
    if (spec.is_categorical()) {
      row[i] = static_cast<double>(categorical_inverse_cdf(model_.categorical[i], u));
    } else {
      double v = numeric_inverse_cdf(model_.numeric[i], u);
      if (spec.integer) v = std::nearbyint(v);
      row[i] = std::clamp(v, spec.integer ? std::ceil(spec.lo) : spec.lo, spec.integer ? std::floor(spec.hi) : spec.hi);
    }
  }
  return row;
}

nlohmann::json CopulaModel::to_json() const {
  nlohmann::json marginals = nlohmann::json::array();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.column(c).is_categorical()) {
      marginals.push_back({{"cumulative", categorical[c].cumulative}});
    } else {
      marginals.push_back({{"sorted", numeric[c].sorted}});
    }
  }
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(factor.rows()));
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) rows[static_cast<std::size_t>(i)].push_back(factor(i, j));
  }
  return {{"format", "limi-copula/1"}, {"schema", schema.to_json()}, {"marginals", marginals},
          {"factor", rows},           {"ridge", ridge}};
}

CopulaModel CopulaModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "limi-copula/1") throw Error(ErrorCode::InvalidConfig, "not a copula model file");
    CopulaModel m;
    m.schema = Schema::from_json(j.at("schema"));
    const std::size_t d = m.schema.size();
    m.numeric.resize(d);
    m.categorical.resize(d);
    const auto& marginals = j.at("marginals");
    for (std::size_t c = 0; c < d; ++c) {
      if (m.schema.column(c).is_categorical()) {
        m.categorical[c].cumulative = marginals.at(c).at("cumulative").get<std::vector<double>>();
      } else {
        m.numeric[c].sorted = marginals.at(c).at("sorted").get<std::vector<double>>();
      }
    }
    const auto rows = j.at("factor").get<std::vector<std::vector<double>>>();
    m.factor = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k <= i; ++k) {
        m.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows.at(i).at(k);
      }
    }
    m.ridge = j.value("ridge", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad copula model: ") + e.what());
  }
}

void CopulaModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << to_json().dump() << '\n';
}

CopulaModel CopulaModel::load(const std::filesystem::path& path) {
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

}  // namespace limi

#include <doctest.h>

#include <cmath>
#include <random>

#include "limi/error.hpp"
#include "limi/surrogate.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace limi;

namespace {

AuxDataset labelled_latents(std::size_t n, std::size_t dim, std::uint64_t seed, int (*rule)(const LatentVector&)) {
  AuxDataset aux;
  aux.latents = sample_latents(n, dim, seed);
  for (const auto& z : aux.latents) aux.labels.push_back(rule(z));
  return aux;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no limi::Error thrown");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("distance") {
  const SurrogateBoundary b({3, 4}, 5);
  CHECK(distance(b, std::vector<double>{1, 1}) == doctest::Approx(2.4).epsilon(1e-15));
  CHECK(std::fabs(distance(b, std::vector<double>{-3, 1})) <= 1e-12);
  const SurrogateBoundary scaled({30, 40}, 50);
  CHECK(distance(scaled, std::vector<double>{1, 1}) == doctest::Approx(2.4).epsilon(1e-15));
  CHECK(code_of([] { SurrogateBoundary({0, 0}, 1); }) == ErrorCode::InvalidConfig);
  CHECK(SurrogateBoundary::from_json(b.to_json()) == b);
}

TEST_CASE("auc") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y{0, 0, 1, 1};
  CHECK(auc(s, y) == 0.75);
  CHECK(auc(std::vector<double>{1, 2, 3, 4}, y) == 1.0);
  CHECK(auc(std::vector<double>{4, 3, 2, 1}, y) == 0.0);
  CHECK(auc(std::vector<double>{1, 1, 1, 1}, y) == 0.5);
  CHECK(code_of([] { auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}); }) == ErrorCode::OneClassSample);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 499;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % 40) / 8.0;  // plenty of ties
      labels[i] = static_cast<int>(rng() % 2);
    }
    labels[0] = 0;
    labels[1] = 1;
    CHECK(auc(scores, labels) == doctest::Approx(oracle::auc(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("build_aux") {
  const test::IdentityGenerator gen(3);
  AuxConfig cfg;
  cfg.n_init = 4'000;
  cfg.per_class = 500;
  cfg.seed = 2;

  SUBCASE("one predicted class") {
    const test::FunctionClassifier always(gen.schema(), [](const Row&) { return 0.9; });
    CHECK(code_of([&] { build_aux(gen, always, cfg); }) == ErrorCode::BoundaryUnlearnable);
  }
  SUBCASE("balanced without filtering") {
    cfg.epsilon = 0.5;
    const test::FunctionClassifier half(gen.schema(), [](const Row& r) { return r[0] > 0 ? 0.9 : 0.1; });
    const auto aux = build_aux(gen, half, cfg);
    std::size_t ones = 0;
    for (int l : aux.labels) ones += static_cast<std::size_t>(l);
    CHECK(ones == 500);
    CHECK(aux.labels.size() == 1'000);
    CHECK(aux.latents.size() == 1'000);
  }
  SUBCASE("confidence filter, replication and separability") {
    cfg.epsilon = 0.7;
    cfg.per_class = 3'000;
    // confidence grows with |z1|
    const test::FunctionClassifier sigmoid(gen.schema(), [](const Row& r) { return 1.0 / (1.0 + std::exp(-2.0 * r[0])); });
    const auto aux = build_aux(gen, sigmoid, cfg);
    CHECK(aux.min_retained_score >= 0.7);
    CHECK(aux.filtered_counts[0] < 3'000);
    CHECK(aux.filtered_counts[1] < 3'000);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < aux.labels.size(); ++i) {
      ones += static_cast<std::size_t>(aux.labels[i]);
      CHECK((aux.latents[i][0] > 0) == (aux.labels[i] == 1));
      // a retained sample has confidence at least epsilon
      CHECK(std::fabs(aux.latents[i][0]) >= std::log(0.7 / 0.3) / 2.0 - 1e-12);
    }
    CHECK(ones == 3'000);
    CHECK(aux.labels.size() == 6'000);
  }
  SUBCASE("truncation keeps per_class of each label") {
    cfg.epsilon = 0.5;
    cfg.per_class = 100;
    const test::FunctionClassifier sigmoid(gen.schema(), [](const Row& r) { return 1.0 / (1.0 + std::exp(-2.0 * r[0])); });
    for (auto rule : {AuxConfig::Truncation::Random, AuxConfig::Truncation::HighestScore}) {
      cfg.truncation = rule;
      const auto aux = build_aux(gen, sigmoid, cfg);
      CHECK(aux.labels.size() == 200);
      if (rule == AuxConfig::Truncation::HighestScore) {
        // kept samples are the most confident ones, so they sit far from z1 = 0
        for (const auto& z : aux.latents) CHECK(std::fabs(z[0]) > 1.5);
      }
    }
  }
}

TEST_CASE("fit_boundary") {
  SvmConfig cfg;
  cfg.seed = 4;
  auto positive_first = [](const LatentVector& z) { return z[0] > 0 ? 1 : 0; };
  auto negative_first = [](const LatentVector& z) { return z[0] > 0 ? 0 : 1; };
  const auto aux = labelled_latents(4'000, 5, 1, positive_first);
  const auto b = fit_boundary(aux, cfg);
  double norm = 0;
  for (double v : b.w()) norm += v * v;
  CHECK(std::fabs(b.w()[0]) / std::sqrt(norm) >= 0.95);
  CHECK(b.w()[0] > 0);
  CHECK(boundary_auc(b, aux.latents, aux.labels) >= 0.99);
  CHECK(svm_objective(b.w(), b.b(), aux, cfg.reg) <= svm_objective({0, 0, 0, 0, 0}, 0, aux, cfg.reg));
  CHECK(fit_boundary(aux, cfg) == b);

  const auto inverted = fit_boundary(labelled_latents(4'000, 5, 1, negative_first), cfg);
  CHECK(inverted.w()[0] < 0);

  auto random = labelled_latents(4'000, 5, 2, positive_first);
  std::mt19937_64 rng(8);
  for (auto& l : random.labels) l = static_cast<int>(rng() % 2);
  const auto rb = fit_boundary(random, cfg);
  CHECK(std::fabs(boundary_auc(rb, random.latents, random.labels) - 0.5) <= 0.05);
}

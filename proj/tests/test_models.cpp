#include <doctest.h>

#include <filesystem>
#include <random>

#include "limi/error.hpp"
#include "limi/models.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace limi;

namespace {

Schema toy_schema() {
  auto g = ColumnSpec::categorical("g", {"a", "b"});
  g.is_protected = true;
  return Schema({ColumnSpec::numeric("x1", 0, 1, false), ColumnSpec::numeric("x2", 0, 1, false), g}, "label");
}

// label = [x1 > 0.5], with a thin band around the threshold left empty.
Dataset separable(std::size_t n, std::uint64_t seed) {
  Dataset ds{toy_schema(), {}, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  while (ds.size() < n) {
    const double x1 = u(rng);
    if (std::fabs(x1 - 0.5) < 0.02) continue;
    ds.rows.push_back(Row{{x1, u(rng), static_cast<double>(ds.size() % 2)}});
    ds.labels.push_back(x1 > 0.5 ? 1 : 0);
  }
  return ds;
}

MlpConfig small_mlp(std::uint64_t seed) {
  MlpConfig cfg;
  cfg.hidden_sizes = {16, 8};
  cfg.learning_rate = 0.01;
  cfg.epochs = 60;
  cfg.batch_size = 32;
  cfg.seed = seed;
  return cfg;
}

std::vector<DenseLayer> perturbed(std::vector<DenseLayer> layers, const std::vector<DenseLayer>& dir, double h) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += h * dir[l].weights;
    layers[l].bias += h * dir[l].bias;
  }
  return layers;
}

}  // namespace

TEST_CASE("prediction from probability") {
  CHECK(Prediction::from_favorable_probability(0.5, 1) == Prediction{1, 0.5});
  CHECK(Prediction::from_favorable_probability(0.9, 1) == Prediction{1, 0.9});
  const auto low = Prediction::from_favorable_probability(0.2, 1);
  CHECK(low.label == 0);
  CHECK(low.score == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(Prediction::from_favorable_probability(0.7, 0) == Prediction{0, 0.7});
}

TEST_CASE("constant zero logistic model") {
  const auto schema = test::person_schema();
  DenseNetwork net(schema, DenseNetwork::Kind::Logistic,
                   {DenseLayer{Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1)}});
  for (const auto& r : sample_uniform(schema, 100, 1)) CHECK(net.predict(r) == Prediction{1, 0.5});
}

TEST_CASE("training on a separable set") {
  const auto ds = separable(1'000, 3);
  const auto mlp = train_mlp(ds, small_mlp(1));
  CHECK(mlp.train_accuracy >= 0.99);
  CHECK(accuracy(*mlp.model, ds) == doctest::Approx(mlp.train_accuracy));
  CHECK(mlp.model->layers().size() == 3);

  const auto lr = train_logreg(ds, 200, 0.05, 2);
  CHECK(lr.train_accuracy >= 0.99);
  CHECK(lr.model->kind() == DenseNetwork::Kind::Logistic);

  SUBCASE("same seed, same parameters") {
    CHECK(train_mlp(ds, small_mlp(1)).model->parameter_hash() == mlp.model->parameter_hash());
    CHECK(train_mlp(ds, small_mlp(2)).model->parameter_hash() != mlp.model->parameter_hash());
    CHECK(train_logreg(ds, 200, 0.05, 2).model->parameter_hash() == lr.model->parameter_hash());
  }
  SUBCASE("predictions are pure and bounded") {
    const Row row{{0.3, 0.6, 1}};
    const auto first = mlp.model->predict(row);
    for (int i = 0; i < 1'000; ++i) CHECK(mlp.model->predict(row) == first);
    for (const auto& p : mlp.model->predict_batch(ds.rows)) CHECK((p.score >= 0.5 && p.score <= 1.0));
  }
  SUBCASE("json round trip") {
    const auto path = fs::temp_directory_path() / "limi_test_mlp.json";
    mlp.model->save(path);
    const auto back = DenseNetwork::load(path);
    CHECK(back.parameter_hash() == mlp.model->parameter_hash());
    CHECK(back.predict_batch(ds.rows) == mlp.model->predict_batch(ds.rows));
  }
}

TEST_CASE("single class dataset") {
  auto ds = separable(50, 4);
  for (auto& l : ds.labels) l = 1;
  try {
    train_mlp(ds, small_mlp(1));
    FAIL("expected SingleClassDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClassDataset);
  }
}

TEST_CASE("retraining") {
  const auto ds = separable(600, 5);
  const auto cfg = small_mlp(9);
  const auto base = train_mlp(ds, cfg);
  Dataset empty{ds.schema, {}, {}};
  CHECK(retrain(ds, empty, cfg).model->parameter_hash() == base.model->parameter_hash());
  const auto doubled = retrain(ds, ds, cfg);
  CHECK(std::fabs(accuracy(*doubled.model, ds) - accuracy(*base.model, ds)) <= 0.02);
}

TEST_CASE("backpropagation matches finite differences") {
  const auto ds = separable(10, 6);
  const Eigen::MatrixXd x = encode_matrix(ds.schema, ds.rows);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y(i) = ds.labels[static_cast<std::size_t>(i)];
  auto layers = init_layers(3, {64, 32, 16, 8, 4}, 12);
  std::mt19937_64 bias_rng(13);
  std::normal_distribution<double> small(0.0, 0.1);
  // nonzero biases keep the check away from rectifier kinks
  for (auto& l : layers) l.bias = l.bias.unaryExpr([&](double) { return small(bias_rng); });
  const double h = 1e-7;
  REQUIRE(oracle::kink_margin(layers, x) > 1e-6);
  const auto lg = loss_and_gradient(layers, x, y);
  CHECK(lg.loss == doctest::Approx(loss_only(layers, x, y)).epsilon(1e-14));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int slice = 0; slice < 10; ++slice) {
    std::vector<DenseLayer> dir = layers;
    double analytic = 0.0;
    for (std::size_t l = 0; l < dir.size(); ++l) {
      dir[l].weights = dir[l].weights.unaryExpr([&](double) { return n01(rng); });
      dir[l].bias = dir[l].bias.unaryExpr([&](double) { return n01(rng); });
      analytic += (dir[l].weights.array() * lg.gradient[l].weights.array()).sum();
      analytic += dir[l].bias.dot(lg.gradient[l].bias);
    }
    const double numeric = (loss_only(perturbed(layers, dir, h), x, y) - loss_only(perturbed(layers, dir, -h), x, y)) / (2 * h);
    CHECK(test::relative_error(analytic, numeric) <= 1e-4);
  }
}

#include "limi/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "limi/error.hpp"

namespace limi {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct ForwardPass {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // inputs to each layer; post[0] = features
};

ForwardPass forward(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& features) {
  ForwardPass fp;
  fp.post.push_back(features);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * fp.post.back();
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) fp.post.push_back(z.cwiseMax(0.0));
    fp.pre.push_back(std::move(z));
  }
  return fp;
}

void check_both_labels(const Dataset& dataset) {
  const auto ones = std::count(dataset.labels.begin(), dataset.labels.end(), 1);
  if (ones == 0 || static_cast<std::size_t>(ones) == dataset.labels.size()) {
    throw Error(ErrorCode::SingleClassDataset, "training data contains a single label");
  }
}

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  std::size_t t = 0;
};

TrainResult train_network(const Dataset& dataset, DenseNetwork::Kind kind, const std::vector<std::size_t>& hidden,
                          double lr, std::size_t epochs, std::size_t batch_size, std::uint64_t seed) {
  check_both_labels(dataset);
  const auto& schema = dataset.schema;
  const Eigen::MatrixXd features = encode_matrix(schema, dataset.rows);
  const auto n = static_cast<Eigen::Index>(dataset.size());
  Eigen::VectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels(i) = dataset.labels[static_cast<std::size_t>(i)];

  auto layers = init_layers(schema.size(), hidden, seed);
  AdamState adam;
  for (const auto& layer : layers) {
    adam.m.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                      Eigen::VectorXd::Zero(layer.bias.size())});
  }
  adam.v = adam.m;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<Eigen::Index>(std::max<std::size_t>(batch_size, 1));

  Eigen::MatrixXd batch_x;
  Eigen::VectorXd batch_y;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index len = std::min(bs, n - start);
      batch_x.resize(features.rows(), len);
      batch_y.resize(len);
      for (Eigen::Index k = 0; k < len; ++k) {
        const auto idx = order[static_cast<std::size_t>(start + k)];
        batch_x.col(k) = features.col(idx);
        batch_y(k) = labels(idx);
      }
      const auto lg = loss_and_gradient(layers, batch_x, batch_y);
      ++adam.t;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam.t));
      for (std::size_t l = 0; l < layers.size(); ++l) {
        auto step = [&](auto& param, auto& m, auto& v, const auto& g) {
          m = beta1 * m + (1.0 - beta1) * g;
          v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
          param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        };
        step(layers[l].weights, adam.m[l].weights, adam.v[l].weights, lg.gradient[l].weights);
        step(layers[l].bias, adam.m[l].bias, adam.v[l].bias, lg.gradient[l].bias);
      }
    }
  }

  auto model = std::make_shared<DenseNetwork>(schema, kind, std::move(layers));
  const Eigen::VectorXd p = model->probabilities(features);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = p(i) >= 0.5 ? 1 : 0;
    correct += label == dataset.labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  return {std::move(model), static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace

Prediction Prediction::from_favorable_probability(double p_favorable, int favorable_label) {
  if (p_favorable >= 0.5) return {favorable_label, p_favorable};
  return {1 - favorable_label, 1.0 - p_favorable};
}

std::vector<Prediction> Classifier::predict_batch(std::span<const Row> rows) const {
  std::vector<Prediction> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(r));
  return out;
}

DenseNetwork::DenseNetwork(Schema schema, Kind kind, std::vector<DenseLayer> layers)
    : schema_(std::move(schema)), kind_(kind), layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::InvalidConfig, "network without layers");
  if (static_cast<std::size_t>(layers_.front().weights.cols()) != schema_.size()) {
    throw Error(ErrorCode::InvalidConfig, "network input width does not match schema");
  }
  if (layers_.back().weights.rows() != 1) throw Error(ErrorCode::InvalidConfig, "network must have one output");
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].weights.cols() != layers_[l - 1].weights.rows()) {
      throw Error(ErrorCode::InvalidConfig, "network layer shapes do not chain");
    }
  }
}

Eigen::VectorXd DenseNetwork::probabilities(const Eigen::MatrixXd& features) const {
  Eigen::MatrixXd a = features;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  Eigen::VectorXd p(a.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i) p(i) = sigmoid(a(0, i));
  return p;
}

Prediction DenseNetwork::predict(const Row& row) const { return predict_batch(std::span<const Row>(&row, 1)).front(); }

std::vector<Prediction> DenseNetwork::predict_batch(std::span<const Row> rows) const {
  const Eigen::VectorXd p1 = probabilities(encode_matrix(schema_, rows));
  const int fav = schema_.favorable_label();
  std::vector<Prediction> out;
  out.reserve(rows.size());
  for (Eigen::Index i = 0; i < p1.size(); ++i) {
    out.push_back(Prediction::from_favorable_probability(fav == 1 ? p1(i) : 1.0 - p1(i), fav));
  }
  return out;
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

std::uint64_t DenseNetwork::parameter_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const double* data, Eigen::Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& l : layers_) {
    mix(l.weights.data(), l.weights.size());
    mix(l.bias.data(), l.bias.size());
  }
  return h;
}

nlohmann::json DenseNetwork::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    layers.push_back({{"in", l.weights.cols()},
                      {"out", l.weights.rows()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"format", "limi-model/1"},
          {"kind", kind_ == Kind::Mlp ? "mlp" : "logistic"},
          {"schema", schema_.to_json()},
          {"layers", layers}};
}

DenseNetwork DenseNetwork::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "limi-model/1") throw Error(ErrorCode::InvalidConfig, "not a model file");
    const auto kind = j.at("kind").get<std::string>() == "mlp" ? Kind::Mlp : Kind::Logistic;
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      const auto in = jl.at("in").get<Eigen::Index>();
      const auto out = jl.at("out").get<Eigen::Index>();
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
        throw Error(ErrorCode::InvalidConfig, "layer parameter arrays do not match their shape");
      }
      DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
        layer.bias(r) = b[static_cast<std::size_t>(r)];
      }
      layers.push_back(std::move(layer));
    }
    return DenseNetwork(Schema::from_json(j.at("schema")), kind, std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad model file: ") + e.what());
  }
}

void DenseNetwork::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << to_json().dump() << '\n';
}

DenseNetwork DenseNetwork::load(const std::filesystem::path& path) {
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

void MlpConfig::validate() const {
  if (hidden_sizes.empty()) throw Error(ErrorCode::InvalidConfig, "MLP needs at least one hidden layer");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch size must be positive");
}

Eigen::MatrixXd encode_matrix(const Schema& schema, std::span<const Row> rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(schema.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    encode_into(schema, rows[r], std::span<double>(x.col(static_cast<Eigen::Index>(r)).data(), schema.size()));
  }
  return x;
}

LossAndGradient loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& features,
                                  const Eigen::VectorXd& labels) {
  const auto fp = forward(layers, features);
  const auto batch = static_cast<double>(features.cols());
  const Eigen::MatrixXd& logits = fp.pre.back();

  LossAndGradient out;
  Eigen::MatrixXd delta(1, features.cols());
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    const double z = logits(0, i);
    out.loss += softplus(z) - labels(i) * z;
    delta(0, i) = (sigmoid(z) - labels(i)) / batch;
  }
  out.loss /= batch;

  out.gradient.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.gradient[l].weights = delta * fp.post[l].transpose();
    out.gradient[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct((fp.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

double loss_only(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& features,
                 const Eigen::VectorXd& labels) {
  const auto fp = forward(layers, features);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    const double z = fp.pre.back()(0, i);
    loss += softplus(z) - labels(i) * z;
  }
  return loss / static_cast<double>(features.cols());
}

std::vector<DenseLayer> init_layers(std::size_t inputs, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t fan_in = inputs;
  auto sizes = hidden;
  sizes.push_back(1);
  for (std::size_t out : sizes) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = normal(rng);
    }
    layers.push_back(std::move(layer));
    fan_in = out;
  }
  return layers;
}

TrainResult train_mlp(const Dataset& dataset, const MlpConfig& cfg) {
  cfg.validate();
  return train_network(dataset, DenseNetwork::Kind::Mlp, cfg.hidden_sizes, cfg.learning_rate, cfg.epochs,
                       cfg.batch_size, cfg.seed);
}

TrainResult train_logreg(const Dataset& dataset, std::size_t epochs, double learning_rate, std::uint64_t seed) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
  return train_network(dataset, DenseNetwork::Kind::Logistic, {}, learning_rate, epochs, 128, seed);
}

TrainResult retrain(const Dataset& base, const Dataset& augment, const MlpConfig& cfg) {
  return train_mlp(concat(base, augment), cfg);
}

double accuracy(const Classifier& model, const Dataset& dataset) {
  if (dataset.empty()) return 0.0;
  const auto preds = model.predict_batch(dataset.rows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == dataset.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace limi

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "limi/schema.hpp"

namespace limi {

/// Predicted label and the confidence of that label, in [0.5, 1].
struct Prediction {
  int label = 0;
  double score = 0.5;

  /// `p_favorable` is the probability of the schema's favorable label. Ties at 0.5
  /// resolve to the favorable label.
  static Prediction from_favorable_probability(double p_favorable, int favorable_label);

  bool operator==(const Prediction&) const = default;
};

/// Black-box binary classifier f(x).
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual const Schema& schema() const = 0;
  std::size_t input_arity() const { return schema().size(); }

  virtual Prediction predict(const Row& row) const = 0;
  virtual std::vector<Prediction> predict_batch(std::span<const Row> rows) const;
};

using ClassifierHandle = std::shared_ptr<const Classifier>;

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

/// Feed-forward network on encoded features: rectifier hidden layers, one logistic
/// output unit giving P(label = 1). With no hidden layers it is logistic regression.
class DenseNetwork final : public Classifier {
 public:
  enum class Kind { Logistic, Mlp };

  DenseNetwork(Schema schema, Kind kind, std::vector<DenseLayer> layers);

  const Schema& schema() const override { return schema_; }
  Prediction predict(const Row& row) const override;
  std::vector<Prediction> predict_batch(std::span<const Row> rows) const override;

  /// P(label = 1) for each column of an encoded feature matrix (features x batch).
  Eigen::VectorXd probabilities(const Eigen::MatrixXd& features) const;

  Kind kind() const { return kind_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;
  /// FNV-1a over the raw parameter bytes.
  std::uint64_t parameter_hash() const;

  nlohmann::json to_json() const;
  static DenseNetwork from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static DenseNetwork load(const std::filesystem::path& path);

 private:
  Schema schema_;
  Kind kind_;
  std::vector<DenseLayer> layers_;
};

struct MlpConfig {
  std::vector<std::size_t> hidden_sizes{64, 32, 16, 8, 4};
  double learning_rate = 0.001;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::shared_ptr<const DenseNetwork> model;
  double train_accuracy = 0.0;
};

/// Encodes every row of a dataset into a features x rows matrix.
Eigen::MatrixXd encode_matrix(const Schema& schema, std::span<const Row> rows);

/// Mean binary cross-entropy of the network on (features, labels) and its gradient with
/// respect to every layer's weights and bias, in layer order.
struct LossAndGradient {
  double loss = 0.0;
  std::vector<DenseLayer> gradient;
};
LossAndGradient loss_and_gradient(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& features,
                                  const Eigen::VectorXd& labels);
double loss_only(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& features,
                 const Eigen::VectorXd& labels);

/// He-initialized layers for the given sizes.
std::vector<DenseLayer> init_layers(std::size_t inputs, const std::vector<std::size_t>& hidden,
                                    std::uint64_t seed);

/// Throws SingleClassDataset unless both labels occur.
TrainResult train_mlp(const Dataset& dataset, const MlpConfig& cfg);
TrainResult train_logreg(const Dataset& dataset, std::size_t epochs, double learning_rate, std::uint64_t seed);
/// Trains from scratch on base followed by augment.
TrainResult retrain(const Dataset& base, const Dataset& augment, const MlpConfig& cfg);

double accuracy(const Classifier& model, const Dataset& dataset);

}  // namespace limi

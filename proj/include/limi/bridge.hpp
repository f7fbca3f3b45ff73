#pragma once

#include <chrono>
#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "limi/generator.hpp"
#include "limi/models.hpp"

namespace limi {

inline constexpr const char* kBridgeVersion = "limi-bridge/1";
inline constexpr std::size_t kBridgeMaxBatch = 4096;

/// Newline-delimited JSON request/response channel to a child process over its
/// stdin/stdout. Requests are serialized; every response must echo the request id.
class BridgeChannel {
 public:
  struct Hello {
    std::string name;
    std::string kind;  // "model" or "generator"
    std::size_t dim = 0;  // n_features or latent_dim
  };

  /// Runs `command` through /bin/sh -c. Throws BridgeFailure when the process cannot start.
  static std::shared_ptr<BridgeChannel> spawn(const std::string& command,
                                              std::chrono::milliseconds timeout = std::chrono::seconds(120));
  ~BridgeChannel();

  BridgeChannel(const BridgeChannel&) = delete;
  BridgeChannel& operator=(const BridgeChannel&) = delete;

  /// Sends {"id", "op", ...payload} and returns the matching response. Throws
  /// BridgeFailure on timeout, process exit, malformed lines, id mismatch or an error
  /// response.
  nlohmann::json request(const std::string& op, nlohmann::json payload = nlohmann::json::object());

  const Hello& hello() const { return hello_; }

  /// Builds the request line for an id; exposed for protocol tests.
  static std::string encode_request(std::uint64_t id, const std::string& op, const nlohmann::json& payload);

 private:
  BridgeChannel(int pid, int to_child, int from_child, std::chrono::milliseconds timeout);
  std::string read_line();
  void shutdown() noexcept;

  int pid_;
  int to_child_;
  int from_child_;
  std::chrono::milliseconds timeout_;
  std::uint64_t next_id_ = 1;
  std::string buffer_;
  Hello hello_;
  std::mutex mutex_;
  bool dead_ = false;
};

/// Row <-> wire encoding: categorical cells travel as their category text, numeric
/// cells as JSON numbers.
nlohmann::json row_to_wire(const Schema& schema, const Row& row);
/// Throws BridgeFailure when a cell is malformed or outside its column's domain.
Row row_from_wire(const Schema& schema, const nlohmann::json& cells);

class ExternalClassifier final : public Classifier {
 public:
  ExternalClassifier(Schema schema, std::shared_ptr<BridgeChannel> channel);

  const Schema& schema() const override { return schema_; }
  Prediction predict(const Row& row) const override;
  std::vector<Prediction> predict_batch(std::span<const Row> rows) const override;

 private:
  Schema schema_;
  std::shared_ptr<BridgeChannel> channel_;
};

class ExternalGenerator final : public Generator {
 public:
  ExternalGenerator(Schema schema, std::shared_ptr<BridgeChannel> channel);

  std::size_t latent_dim() const override { return latent_dim_; }
  const Schema& schema() const override { return schema_; }
  Row decode(std::span<const double> z) const override;
  std::vector<Row> decode_batch(std::span<const LatentVector> zs) const override;

 private:
  Schema schema_;
  std::shared_ptr<BridgeChannel> channel_;
  std::size_t latent_dim_;
};

}  // namespace limi

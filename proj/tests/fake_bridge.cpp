// Bridge server used by the tests: speaks the NDJSON protocol on stdin/stdout and can
// be told to misbehave.
#include <chrono>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

#include "limi/bridge.hpp"
#include "limi/generator.hpp"
#include "limi/models.hpp"

using nlohmann::json;

namespace {

void send(const json& j) { std::cout << j.dump() << std::endl; }

json ok(const json& request) { return {{"id", request.at("id")}, {"ok", true}}; }

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: fake_bridge <mode> <arg> [log]\n";
    return 2;
  }
  const std::string mode = argv[1];
  const std::string arg = argv[2];
  const std::string log_path = argc > 3 ? argv[3] : "";

  std::unique_ptr<limi::DenseNetwork> network;
  std::unique_ptr<limi::CopulaGenerator> generator;
  std::size_t n_features = 0;
  if (mode == "model") {
    network = std::make_unique<limi::DenseNetwork>(limi::DenseNetwork::load(arg));
    n_features = network->schema().size();
  } else if (mode == "generator") {
    generator = std::make_unique<limi::CopulaGenerator>(limi::CopulaModel::load(arg));
  } else {
    n_features = std::stoul(arg);
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      send({{"id", nullptr}, {"ok", false}, {"error", "malformed request"}});
      continue;
    }
    const auto op = req.value("op", "");
    if (op == "hello") {
      json r = ok(req);
      r["version"] = mode == "bad-version" ? "limi-bridge/0" : limi::kBridgeVersion;
      r["name"] = "fake-" + mode;
      if (generator) {
        r["kind"] = "generator";
        r["latent_dim"] = generator->latent_dim();
      } else {
        r["kind"] = mode == "bad-kind" ? "toaster" : "model";
        r["n_features"] = n_features;
      }
      send(r);
    } else if (op == "shutdown") {
      send(ok(req));
      return 0;
    } else if (op == "predict") {
      const auto& rows = req.at("rows");
      if (!log_path.empty()) std::ofstream(log_path, std::ios::app) << rows.size() << '\n';
      if (mode == "garbled") {
        std::cout << "{\"id\": " << req["id"] << ", \"ok\": tru" << std::endl;
        continue;
      }
      if (mode == "die") return 3;
      if (mode == "hang") std::this_thread::sleep_for(std::chrono::hours(1));
      if (mode == "error") {
        send({{"id", req["id"]}, {"ok", false}, {"error", "boom"}});
        continue;
      }
      json r = ok(req);
      if (mode == "wrong-id") r["id"] = req["id"].get<long>() + 1;
      json labels = json::array();
      json scores = json::array();
      for (const auto& cells : rows) {
        if (network) {
          const auto p = network->predict(limi::row_from_wire(network->schema(), cells));
          labels.push_back(p.label);
          scores.push_back(p.score);
        } else {
          labels.push_back(1);
          scores.push_back(mode == "bad-score" ? 0.3 : 0.5);
        }
      }
      r["labels"] = labels;
      r["scores"] = scores;
      send(r);
    } else if (op == "decode" && generator) {
      json r = ok(req);
      json rows = json::array();
      for (const auto& z : req.at("latents")) {
        rows.push_back(limi::row_to_wire(generator->schema(), generator->decode(z.get<std::vector<double>>())));
      }
      r["rows"] = rows;
      send(r);
    } else {
      send({{"id", req["id"]}, {"ok", false}, {"error", "unsupported op '" + op + "'"}});
    }
  }
  return 0;
}

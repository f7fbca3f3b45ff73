#include "limi/bridge.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "limi/error.hpp"

namespace limi {

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::BridgeFailure, what); }

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(std::string("write to bridge process failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::shared_ptr<BridgeChannel> BridgeChannel::spawn(const std::string& command, std::chrono::milliseconds timeout) {
  // A dead child must surface as an error, not kill us with SIGPIPE.
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) fail("cannot create pipes");
  const pid_t pid = ::fork();
  if (pid < 0) fail("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);

  std::shared_ptr<BridgeChannel> channel(new BridgeChannel(pid, in_pipe[1], out_pipe[0], timeout));
  const auto hello = channel->request("hello");
  if (hello.value("version", "") != kBridgeVersion) fail("unsupported bridge version");
  channel->hello_.name = hello.value("name", "");
  channel->hello_.kind = hello.value("kind", "");
  if (channel->hello_.kind == "model") {
    channel->hello_.dim = hello.value("n_features", std::size_t{0});
  } else if (channel->hello_.kind == "generator") {
    channel->hello_.dim = hello.value("latent_dim", std::size_t{0});
  } else {
    fail("hello response has unknown kind '" + channel->hello_.kind + "'");
  }
  return channel;
}

BridgeChannel::BridgeChannel(int pid, int to_child, int from_child, std::chrono::milliseconds timeout)
    : pid_(pid), to_child_(to_child), from_child_(from_child), timeout_(timeout) {}

BridgeChannel::~BridgeChannel() { shutdown(); }

void BridgeChannel::shutdown() noexcept {
  if (pid_ <= 0) return;
  if (!dead_) {
    try {
      write_all(to_child_, encode_request(next_id_++, "shutdown", nlohmann::json::object()));
    } catch (...) {
    }
  }
  ::close(to_child_);
  ::close(from_child_);
  // Give the child a moment to exit on its own before killing it.
  int status = 0;
  for (int i = 0; i < 50; ++i) {
    if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      ::kill(-pid_, SIGKILL);
      pid_ = -1;
      return;
    }
    ::usleep(10'000);
  }
  ::kill(-pid_, SIGKILL);
  ::waitpid(pid_, &status, 0);
  pid_ = -1;
}

std::string BridgeChannel::encode_request(std::uint64_t id, const std::string& op, const nlohmann::json& payload) {
  nlohmann::json msg = payload.is_object() ? payload : nlohmann::json::object();
  msg["id"] = id;
  msg["op"] = op;
  return msg.dump() + "\n";
}

std::string BridgeChannel::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      dead_ = true;
      fail("bridge process timed out");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    char buf[65536];
    const auto n = ::read(from_child_, buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      dead_ = true;
      fail("bridge process closed its output");
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

nlohmann::json BridgeChannel::request(const std::string& op, nlohmann::json payload) {
  std::lock_guard lock(mutex_);
  if (dead_) fail("bridge process is no longer usable");
  const auto id = next_id_++;
  write_all(to_child_, encode_request(id, op, payload));
  const auto line = read_line();
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    dead_ = true;
    fail("malformed response line: " + line.substr(0, 200));
  }
  if (!response.is_object() || !response.contains("id") || response["id"] != id) {
    dead_ = true;
    fail("response id does not match request " + std::to_string(id));
  }
  if (!response.value("ok", false)) fail("bridge error: " + response.value("error", std::string("unspecified")));
  return response;
}

nlohmann::json row_to_wire(const Schema& schema, const Row& row) {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& spec = schema.column(c);
    if (spec.is_categorical()) {
      cells.push_back(spec.categories[static_cast<std::size_t>(row[c])]);
    } else if (spec.integer) {
      cells.push_back(static_cast<long long>(row[c]));
    } else {
      cells.push_back(row[c]);
    }
  }
  return cells;
}

Row row_from_wire(const Schema& schema, const nlohmann::json& cells) {
  if (!cells.is_array() || cells.size() != schema.size()) fail("row has wrong arity");
  Row row;
  row.values.resize(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& spec = schema.column(c);
    const auto& cell = cells[c];
    try {
      if (cell.is_string()) {
        row[c] = spec.parse(cell.get<std::string>());
      } else if (cell.is_number() && !spec.is_categorical()) {
        row[c] = cell.get<double>();
        if (!spec.contains(row[c])) fail("column '" + spec.name + "' value outside domain");
      } else {
        fail("column '" + spec.name + "' has a malformed cell");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BridgeFailure) throw;
      fail(e.what());
    }
  }
  return row;
}

ExternalClassifier::ExternalClassifier(Schema schema, std::shared_ptr<BridgeChannel> channel)
    : schema_(std::move(schema)), channel_(std::move(channel)) {
  if (channel_->hello().kind != "model") fail("bridge process is not a model");
  if (channel_->hello().dim != schema_.size()) fail("bridge model arity does not match the schema");
}

Prediction ExternalClassifier::predict(const Row& row) const {
  return predict_batch(std::span<const Row>(&row, 1)).front();
}

std::vector<Prediction> ExternalClassifier::predict_batch(std::span<const Row> rows) const {
  std::vector<Prediction> out;
  out.reserve(rows.size());
  for (std::size_t off = 0; off < rows.size(); off += kBridgeMaxBatch) {
    const auto part = rows.subspan(off, std::min(kBridgeMaxBatch, rows.size() - off));
    nlohmann::json wire = nlohmann::json::array();
    for (const auto& r : part) wire.push_back(row_to_wire(schema_, r));
    const auto resp = channel_->request("predict", {{"rows", wire}});
    const auto& labels = resp.at("labels");
    const auto& scores = resp.at("scores");
    if (!labels.is_array() || !scores.is_array() || labels.size() != part.size() || scores.size() != part.size()) {
      fail("predict response has wrong length");
    }
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (!labels[i].is_number_integer() || !scores[i].is_number()) fail("predict response has malformed entries");
      const int label = labels[i].get<int>();
      const double score = scores[i].get<double>();
      if ((label != 0 && label != 1) || !(score >= 0.5 && score <= 1.0)) {
        fail("predict response outside label {0,1} / score [0.5,1]");
      }
      out.push_back({label, score});
    }
  }
  return out;
}

ExternalGenerator::ExternalGenerator(Schema schema, std::shared_ptr<BridgeChannel> channel)
    : schema_(std::move(schema)), channel_(std::move(channel)), latent_dim_(channel_->hello().dim) {
  if (channel_->hello().kind != "generator") fail("bridge process is not a generator");
  if (latent_dim_ == 0) fail("bridge generator declared latent_dim 0");
}

Row ExternalGenerator::decode(std::span<const double> z) const {
  const LatentVector v(z.begin(), z.end());
  return decode_batch(std::span<const LatentVector>(&v, 1)).front();
}

std::vector<Row> ExternalGenerator::decode_batch(std::span<const LatentVector> zs) const {
  std::vector<Row> out;
  out.reserve(zs.size());
  for (std::size_t off = 0; off < zs.size(); off += kBridgeMaxBatch) {
    const auto part = zs.subspan(off, std::min(kBridgeMaxBatch, zs.size() - off));
    nlohmann::json wire = nlohmann::json::array();
    for (const auto& z : part) {
      if (z.size() != latent_dim_) fail("latent has wrong dimension");
      wire.push_back(z);
    }
    const auto resp = channel_->request("decode", {{"latents", wire}});
    const auto& rows = resp.at("rows");
    if (!rows.is_array() || rows.size() != part.size()) fail("decode response has wrong length");
    for (const auto& r : rows) out.push_back(row_from_wire(schema_, r));
  }
  return out;
}

}  // namespace limi

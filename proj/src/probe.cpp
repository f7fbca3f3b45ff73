#include "limi/probe.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "limi/error.hpp"

namespace limi {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_dim(const SurrogateBoundary& boundary, std::size_t n) {
  if (boundary.dim() != n) {
    throw Error(ErrorCode::InvalidConfig, "latent of size " + std::to_string(n) + " against a boundary of size " +
                                              std::to_string(boundary.dim()));
  }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Accumulates per-chunk outcomes in order, enforcing the budget and deduplication.
class Collector {
 public:
  explicit Collector(const ProbeConfig& cfg) : cfg_(cfg) {}

  bool exhausted() const { return result_.stats.tested >= cfg_.budget; }

  // A unit (latent tuple or random row) whose members were tested in order; `hit` is
  // the index of the discriminatory member, if any. Returns false once the budget ran out.
  bool add(std::size_t members_tested, std::optional<std::size_t> hit, std::optional<DiscriminatoryPair>&& pair) {
    const std::size_t remaining = cfg_.budget - result_.stats.tested;
    if (remaining == 0) return false;
    ++result_.stats.tuples;
    if (members_tested > remaining) {
      members_tested = remaining;
      if (hit && *hit >= remaining) hit.reset();
    }
    result_.stats.tested += members_tested;
    if (hit) {
      ++result_.stats.raw_found;
      if (!cfg_.dedup || seen_.insert(pair->x).second) result_.pairs.push_back(std::move(*pair));
    }
    return !exhausted();
  }

  ProbeResult finish(Clock::time_point start) {
    auto& s = result_.stats;
    s.found = result_.pairs.size();
    s.elapsed_secs = seconds_since(start);
    s.egs = s.elapsed_secs > 0.0 ? static_cast<double>(s.found) / s.elapsed_secs : 0.0;
    return std::move(result_);
  }

 private:
  const ProbeConfig& cfg_;
  ProbeResult result_;
  std::unordered_set<Row, RowHash> seen_;
};

bool out_of_time(const ProbeConfig& cfg, Clock::time_point start) {
  return cfg.time_limit_secs && seconds_since(start) >= *cfg.time_limit_secs;
}

// Tests g(z0), g(z+), g(z-) for every latent of the chunk, decoding a member only while
// its tuple is still unresolved.
void probe_chunk(const Generator& gen, const Classifier& model, const SurrogateBoundary& boundary,
                 const Schema& schema, double lambda, std::span<const LatentVector> zs, Collector& collector) {
  const std::size_t n = zs.size();
  std::array<std::vector<LatentVector>, 3> members;
  for (auto& m : members) m.reserve(n);
  for (const auto& z : zs) {
    auto z0 = project(boundary, z);
    auto [plus, minus] = candidates(boundary, z0, lambda);
    members[0].push_back(std::move(z0));
    members[1].push_back(std::move(plus));
    members[2].push_back(std::move(minus));
  }

  std::vector<std::optional<std::size_t>> hit(n);
  std::vector<std::optional<DiscriminatoryPair>> pairs(n);
  std::vector<std::size_t> pending(n);
  for (std::size_t i = 0; i < n; ++i) pending[i] = i;

  constexpr ProbeSource sources[] = {ProbeSource::Z0, ProbeSource::ZPlus, ProbeSource::ZMinus};
  for (std::size_t m = 0; m < 3 && !pending.empty(); ++m) {
    std::vector<LatentVector> batch;
    batch.reserve(pending.size());
    for (auto i : pending) batch.push_back(members[m][i]);
    const auto rows = gen.decode_batch(batch);
    auto found = find_discriminatory(model, schema, rows);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      const auto i = pending[k];
      if (found[k]) {
        found[k]->source = sources[m];
        hit[i] = m;
        pairs[i] = std::move(found[k]);
      } else {
        still.push_back(i);
      }
    }
    pending = std::move(still);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t tested = hit[i] ? *hit[i] + 1 : 3;
    if (!collector.add(tested, hit[i], std::move(pairs[i]))) break;
  }
}

}  // namespace

LatentVector project(const SurrogateBoundary& boundary, std::span<const double> z) {
  check_dim(boundary, z.size());
  const auto wu = boundary.unit_normal();
  const double d = distance(boundary, z);
  LatentVector z0(z.begin(), z.end());
  if (d == 0.0) return z0;
  for (std::size_t i = 0; i < z0.size(); ++i) z0[i] -= d * wu[i];
  return z0;
}

std::pair<LatentVector, LatentVector> candidates(const SurrogateBoundary& boundary, std::span<const double> z0,
                                                 double lambda) {
  check_dim(boundary, z0.size());
  const auto wu = boundary.unit_normal();
  LatentVector plus(z0.begin(), z0.end());
  LatentVector minus(z0.begin(), z0.end());
  for (std::size_t i = 0; i < wu.size(); ++i) {
    plus[i] += lambda * wu[i];
    minus[i] -= lambda * wu[i];
  }
  return {std::move(plus), std::move(minus)};
}

IterativeProbeResult iterative_probe(const SurrogateBoundary& boundary, std::span<const double> z,
                                     const IterativeProbeConfig& cfg) {
  check_dim(boundary, z.size());
  if (cfg.dir != 1 && cfg.dir != -1) throw Error(ErrorCode::InvalidConfig, "dir must be +1 or -1");
  if (!(cfg.step > 0.0)) throw Error(ErrorCode::InvalidConfig, "step must be positive");
  const auto wu = boundary.unit_normal();
  const bool start_side = distance(boundary, z) >= 0.0;
  IterativeProbeResult out{LatentVector(z.begin(), z.end()), 0};
  while (out.steps < cfg.max_iters) {
    for (std::size_t i = 0; i < wu.size(); ++i) out.z[i] += cfg.dir * cfg.step * wu[i];
    ++out.steps;
    if ((distance(boundary, out.z) >= 0.0) != start_side) return out;
  }
  throw Error(ErrorCode::NoConvergence, "no side change after " + std::to_string(cfg.max_iters) + " steps");
}

ProtectedHyperplane::ProtectedHyperplane(std::vector<double> w, double b) : w_(std::move(w)), b_(b) {
  const double norm = std::sqrt(dot(w_, w_));
  if (!(norm > 0.0)) throw Error(ErrorCode::InvalidConfig, "protected hyperplane needs a nonzero normal");
  for (auto& v : w_) v /= norm;
  b_ /= norm;
}

LatentVector latent_flip(const ProtectedHyperplane& h, std::span<const double> z) {
  if (h.w().size() != z.size()) throw Error(ErrorCode::InvalidConfig, "dimension mismatch in latent_flip");
  const double d = dot(h.w(), z) + h.b();
  LatentVector out(z.begin(), z.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= 2.0 * d * h.w()[i];
  return out;
}

std::string_view to_string(ProbeSource source) {
  switch (source) {
    case ProbeSource::Z0: return "z0";
    case ProbeSource::ZPlus: return "z+";
    case ProbeSource::ZMinus: return "z-";
    case ProbeSource::Random: return "random";
  }
  return "unknown";
}

std::vector<std::optional<DiscriminatoryPair>> find_discriminatory(const Classifier& model, const Schema& schema,
                                                                   std::span<const Row> rows) {
  std::vector<Row> all;
  std::vector<std::size_t> first_variant(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    all.push_back(rows[r]);
    auto variants = protected_variants(schema, rows[r]);
    first_variant[r] = all.size();
    for (auto& v : variants) all.push_back(std::move(v));
  }
  first_variant[rows.size()] = all.size();
  const auto preds = model.predict_batch(all);

  std::vector<std::optional<DiscriminatoryPair>> out(rows.size());
  std::size_t base = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto end = r + 1 < rows.size() ? first_variant[r + 1] - 1 : all.size();
    for (std::size_t k = first_variant[r]; k < end; ++k) {
      if (preds[k].label != preds[base].label) {
        out[r] = DiscriminatoryPair{rows[r], all[k], preds[base], preds[k], ProbeSource::Z0};
        break;
      }
    }
    base = end;
  }
  return out;
}

std::optional<DiscriminatoryPair> is_discriminatory(const Classifier& model, const Schema& schema, const Row& row) {
  return find_discriminatory(model, schema, std::span<const Row>(&row, 1)).front();
}

void ProbeConfig::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be non-negative");
  if (budget < 1) throw Error(ErrorCode::InvalidConfig, "budget must be at least 1");
  if (chunk < 1) throw Error(ErrorCode::InvalidConfig, "chunk must be at least 1");
}

ProbeResult run(const Generator& gen, const Classifier& model, const SurrogateBoundary& boundary,
                const Schema& schema, const ProbeConfig& cfg) {
  cfg.validate();
  check_dim(boundary, gen.latent_dim());
  const auto start = Clock::now();
  Collector collector(cfg);
  LatentStream stream(gen.latent_dim(), cfg.seed);
  const std::size_t chunk = std::min(cfg.chunk, cfg.budget);
  while (!collector.exhausted() && !out_of_time(cfg, start)) {
    const auto zs = stream.next(chunk);
    probe_chunk(gen, model, boundary, schema, cfg.lambda, zs, collector);
  }
  return collector.finish(start);
}

ProbeResult run(const Generator& gen, const Classifier& model, const SurrogateBoundary& boundary,
                const Schema& schema, const ProbeConfig& cfg, std::span<const LatentVector> latents) {
  cfg.validate();
  check_dim(boundary, gen.latent_dim());
  const auto start = Clock::now();
  Collector collector(cfg);
  const std::size_t chunk = std::min(cfg.chunk, cfg.budget);
  for (std::size_t offset = 0; offset < latents.size() && !collector.exhausted() && !out_of_time(cfg, start);
       offset += chunk) {
    probe_chunk(gen, model, boundary, schema, cfg.lambda, latents.subspan(offset, std::min(chunk, latents.size() - offset)),
                collector);
  }
  return collector.finish(start);
}

ProbeResult run_random(const Classifier& model, const Schema& schema, const ProbeConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  Collector collector(cfg);
  UniformRowStream stream(schema, cfg.seed);
  const std::size_t chunk = std::min(cfg.chunk, cfg.budget);
  while (!collector.exhausted() && !out_of_time(cfg, start)) {
    const auto rows = stream.next(chunk);
    auto found = find_discriminatory(model, schema, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::optional<std::size_t> hit;
      if (found[i]) {
        found[i]->source = ProbeSource::Random;
        hit = 0;
      }
      if (!collector.add(1, hit, std::move(found[i]))) break;
    }
  }
  return collector.finish(start);
}

}  // namespace limi

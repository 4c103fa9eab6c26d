#include "aseg/federation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "aseg/kernels.hpp"

namespace aseg {

namespace {
constexpr std::uint64_t kSamplingSlot = 0xFFFFFFFFULL;
}

double NoiseModel::variance_bound(std::size_t d) const {
  switch (kind) {
    case NoiseKind::None:
      return 0.0;
    case NoiseKind::Gaussian:
      return static_cast<double>(d) * scale * scale;
    case NoiseKind::Uniform:
      return static_cast<double>(d) * scale * scale / 3.0;
  }
  return 0.0;
}

void NoiseModel::perturb(VecView g, Rng& rng) const {
  if (kind == NoiseKind::None || scale == 0.0) return;
  if (kind == NoiseKind::Gaussian) {
    std::normal_distribution<double> nd(0.0, scale);
    for (auto& gi : g) gi += nd(rng);
  } else {
    std::uniform_real_distribution<double> ud(-scale, scale);
    for (auto& gi : g) gi += ud(rng);
  }
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::None:
      return "none";
    case NoiseKind::Gaussian:
      return "gaussian";
    case NoiseKind::Uniform:
      return "uniform";
  }
  return "none";
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "none") return NoiseKind::None;
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "uniform") return NoiseKind::Uniform;
  throw ConfigError("unknown noise kind '" + s + "'");
}

Federation::Federation(std::vector<Objective> nodes, NoiseModel noise, SamplingPlan plan,
                       std::uint64_t master_seed)
    : nodes_(std::move(nodes)), noise_(noise), plan_(plan), rng_(master_seed) {
  if (nodes_.size() < 2) throw ConfigError("federation needs at least two nodes");
  if (plan_.B < 1) throw ConfigError("batch size B must be >= 1");
  if (noise_.scale < 0) throw ConfigError("noise scale must be >= 0");
  if (plan_.mode == Participation::Sampled && !plan_.replacement &&
      plan_.B > nodes_.size() - 1)
    throw ConfigError("B = " + std::to_string(plan_.B) + " exceeds the round-1 pool of " +
                      std::to_string(nodes_.size() - 1) + " nodes without replacement");
  global_ = std::make_shared<const Objective>(Objective::average(nodes_));
}

std::vector<std::size_t> Federation::sample_clients(int round, std::uint64_t iteration) const {
  if (round != 1 && round != 2) throw std::invalid_argument("round must be 1 or 2");
  const std::size_t M = nodes_.size();
  const std::size_t first = round == 1 ? 1 : 0;
  const std::size_t pool = M - first;
  std::vector<std::size_t> out;
  if (plan_.mode == Participation::Full) {
    for (std::size_t m = first; m < M; ++m) out.push_back(m);
    return out;
  }
  Rng rng = rng_.stream(iteration, static_cast<std::uint64_t>(round), kSamplingSlot, 0);
  if (plan_.replacement) {
    std::uniform_int_distribution<std::size_t> ud(0, pool - 1);
    for (std::size_t i = 0; i < plan_.B; ++i) out.push_back(first + ud(rng));
    return out;
  }
  if (plan_.B > pool)
    throw ConfigError("cannot draw " + std::to_string(plan_.B) + " of " + std::to_string(pool) +
                      " nodes without replacement");
  std::vector<std::size_t> ids(pool);
  for (std::size_t i = 0; i < pool; ++i) ids[i] = first + i;
  for (std::size_t i = 0; i < plan_.B; ++i) {
    std::uniform_int_distribution<std::size_t> ud(i, pool - 1);
    std::swap(ids[i], ids[ud(rng)]);
    out.push_back(ids[i]);
  }
  return out;
}

Vec Federation::noisy_grad(std::size_t node, ConstVecView x, Rng& rng, bool count_contact) {
  Vec g = nodes_.at(node).gradient(x);
  noise_.perturb(g, rng);
  if (count_contact) ++ledger_.contacts;
  return g;
}

Vec Federation::aggregate_s(std::uint64_t iteration, std::span<const std::size_t> sampled,
                            ConstVecView x_g) {
  if (sampled.empty()) throw std::invalid_argument("aggregate_s: empty sample");
  const std::size_t d = dim();
  Vec acc(d, 0.0);
  for (std::size_t slot = 0; slot < sampled.size(); ++slot) {
    Rng rng = rng_.stream(iteration, 1, slot, sampled[slot]);
    const Vec g = noisy_grad(sampled[slot], x_g, rng);
    kernels::axpy(1.0, g, acc);
  }
  const Vec g_server = server().gradient(x_g);  // local, no contact
  const double inv_b = 1.0 / static_cast<double>(sampled.size());
  const double M = static_cast<double>(nodes_.size());
  const double c = plan_.reweight_server_pool ? (M - 1.0) / M : 1.0;
  Vec s(d);
  for (std::size_t i = 0; i < d; ++i) s[i] = c * (acc[i] * inv_b - g_server[i]);
  return s;
}

Vec Federation::aggregate_t(std::uint64_t iteration, std::span<const std::size_t> sampled,
                            ConstVecView x_f) {
  if (sampled.empty()) throw std::invalid_argument("aggregate_t: empty sample");
  const std::size_t d = dim();
  Vec acc(d, 0.0);
  for (std::size_t slot = 0; slot < sampled.size(); ++slot) {
    const std::size_t m = sampled[slot];
    if (plan_.mode == Participation::Full && m == 0) {
      // The server's own term is computed locally.
      kernels::axpy(1.0, server().gradient(x_f), acc);
      continue;
    }
    Rng rng = rng_.stream(iteration, 2, slot, m);
    kernels::axpy(1.0, noisy_grad(m, x_f, rng), acc);
  }
  const double inv_b = 1.0 / static_cast<double>(sampled.size());
  for (auto& v : acc) v *= inv_b;
  return acc;
}

void Federation::finish_iteration() {
  const std::size_t M = nodes_.size();
  ++ledger_.iterations;
  if (plan_.mode == Participation::Full) {
    ledger_.normalized_rounds = static_cast<double>(ledger_.iterations);
  } else {
    // Recomputed from integers so that N iterations give exactly N B / M.
    ledger_.normalized_rounds =
        static_cast<double>(ledger_.iterations * static_cast<std::int64_t>(plan_.B)) /
        static_cast<double>(M);
    ledger_.bits_sent += 2 * static_cast<std::int64_t>(M - 1);
  }
}

}  // namespace aseg

#pragma once

// Server + M clients with client sampling, additive gradient noise and an
// exact communication ledger. Node ids are 0-based; node 0 is the server.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aseg/problem.hpp"
#include "aseg/rng.hpp"

namespace aseg {

enum class NoiseKind { None, Gaussian, Uniform };

/// Zero-mean per-coordinate noise added to every transmitted gradient.
struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double scale = 0.0;  ///< stddev (Gaussian) or half-width c (Uniform)

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double stddev) { return {NoiseKind::Gaussian, stddev}; }
  static NoiseModel uniform(double half_width) { return {NoiseKind::Uniform, half_width}; }

  /// E||xi||^2: d s^2 (Gaussian) or d c^2 / 3 (Uniform).
  double variance_bound(std::size_t d) const;
  void perturb(VecView g, Rng& rng) const;
};

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& s);

enum class Participation {
  Sampled,  ///< B nodes per round drawn from the round's pool
  Full      ///< every node in both rounds; the deterministic AEG special case
};

struct SamplingPlan {
  std::size_t B = 1;
  bool replacement = true;
  Participation mode = Participation::Sampled;
  /// Scale s_k by (M-1)/M so that E[s_k] = grad p(x_g) with p = r - r_1.
  bool reweight_server_pool = true;
};

struct CommLedger {
  std::int64_t contacts = 0;        ///< vector exchanges node <-> server
  double normalized_rounds = 0.0;   ///< B/M per iteration
  std::int64_t bits_sent = 0;       ///< participation flags
  std::int64_t iterations = 0;
};

class Federation {
 public:
  Federation(std::vector<Objective> nodes, NoiseModel noise, SamplingPlan plan,
             std::uint64_t master_seed);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t dim() const noexcept { return nodes_.front().dim(); }
  const Objective& server() const { return nodes_.front(); }
  const Objective& node(std::size_t m) const { return nodes_.at(m); }
  std::span<const Objective> nodes() const { return nodes_; }
  const Objective& global() const { return *global_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  const SamplingPlan& plan() const noexcept { return plan_; }
  const RngPolicy& rng_policy() const noexcept { return rng_; }
  const CommLedger& ledger() const noexcept { return ledger_; }
  void reset_ledger() { ledger_ = {}; }

  /// Round 1 draws from nodes {1..M-1}, round 2 from {0..M-1}.
  std::vector<std::size_t> sample_clients(int round, std::uint64_t iteration) const;

  /// Exact local gradient plus noise; records one contact when asked.
  Vec noisy_grad(std::size_t node, ConstVecView x, Rng& rng, bool count_contact = true);

  /// s_k = c/B sum_{m in I} (grad r_m(x_g, xi) - grad r_1(x_g)), c = (M-1)/M
  /// when reweighting, else 1.
  Vec aggregate_s(std::uint64_t iteration, std::span<const std::size_t> sampled, ConstVecView x_g);
  /// t_k = 1/B sum_{m in I} grad r_m(x_f, xi)
  Vec aggregate_t(std::uint64_t iteration, std::span<const std::size_t> sampled, ConstVecView x_f);

  /// Books the per-iteration normalized round and participation bits.
  void finish_iteration();

 private:
  std::vector<Objective> nodes_;
  std::shared_ptr<const Objective> global_;
  NoiseModel noise_;
  SamplingPlan plan_;
  RngPolicy rng_;
  CommLedger ledger_;
};

}  // namespace aseg

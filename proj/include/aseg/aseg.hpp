#pragma once

// Accelerated stochastic extragradient: parameter presets, theta schedules
// and the two drivers (strongly convex with constant parameters, convex with
// tau_k = 2/(k+1)).

#include <cstdint>
#include <optional>
#include <vector>

#include "aseg/federation.hpp"
#include "aseg/prox.hpp"

namespace aseg {

struct AsegParams {
  double tau = 1.0;
  double eta = 1.0;
  double theta = 1.0;
  double alpha = 0.0;
  std::size_t B = 1;
  std::size_t N = 1;
  int zeta = 0;

  /// Throws ConfigError unless tau in (0,1], eta, theta > 0 and alpha >= 0.
  void validate() const;
};

/// alpha = mu/3, eta = min{1/(3 alpha), theta/(3 tau)}, tau = sqrt(mu theta)/3,
/// theta = theta_opt or 1/(3 delta).
AsegParams tune_set1(double mu, double delta, std::optional<double> theta_opt = {});

/// As tune_set1 but tau = sqrt(mu theta) and theta <= min{1/(3 delta), mu^3 B^2 / (5184 delta^4)}.
AsegParams tune_set2(double mu, double delta, std::size_t B,
                     std::optional<double> theta_opt = {});

double theta_cap_set2(double mu, double delta, std::size_t B);

/// Smallest batch for which the second theta cap stops binding:
/// ceil(72 (delta/mu)^{3/2}).
long long b_threshold(double mu, double delta);

struct ThetaChoice {
  double theta = 0.0;
  double candidate = 0.0;  ///< +inf when sigma_sq == 0
  int branch = 0;          ///< 1: candidate, 2: 1/(3 delta), 3: candidate under cap2, 4: cap2
};

/// Theta for a horizon of N iterations. sigma_sq is 2(sigma_sim^2 + sigma_noise^2).
/// Preset 1 (pairs with tune_set1): min{9 ln^2(max{2, B mu N^2 Phi0 / (36 sigma^2)}) / (mu N^2), 1/(3 delta)}.
/// Preset 2 (pairs with tune_set2): the 324 / 1296 analogue, also capped by mu^3 B^2 / (5184 delta^4).
ThetaChoice theta_schedule_strongly_convex(int preset, std::size_t B, double mu, double delta,
                                           std::size_t N, double Phi0, double sigma_sq);

/// min{sqrt(B) ||x0 - x*|| / (sqrt(3) sigma (N+1)^{3/2}), 1/(3 delta)}, sigma = sqrt(sigma_sq).
ThetaChoice theta_convex(std::size_t B, double delta, std::size_t N, double dist0,
                         double sigma_sq);

enum class EtaRule {
  Proof,     ///< eta_{k+1} = theta / (2 tau_{k+1})
  Statement  ///< eta_{k+1} = theta / tau_{k+1}
};

struct ConvexSchedule {
  double theta = 1.0;
  EtaRule eta_rule = EtaRule::Proof;
  std::size_t N = 1;

  static double tau(std::size_t k) { return 2.0 / (static_cast<double>(k) + 1.0); }
  double eta(std::size_t k) const {
    return eta_rule == EtaRule::Proof ? theta / (2.0 * tau(k)) : theta / tau(k);
  }
};

struct TraceRow {
  std::size_t k = 0;
  double phi = 0.0;
  double gap = 0.0;         ///< r(x_f^k) - r*, NaN in blind mode
  double dist_sq = 0.0;     ///< ||x^k - x*||^2, NaN in blind mode
  std::int64_t contacts = 0;
  double normalized_rounds = 0.0;
  double grad_norm_sq = 0.0;  ///< ||grad r(x_f^k)||^2
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<double> dist_f_sq;  ///< ||x_f^k - x*||^2 per row
  std::vector<double> dist_g_sq;  ///< ||x_g^{k-1} - x*||^2 per row (NaN at k = 0)
  Vec x;
  Vec x_f;
  CommLedger ledger;
  bool blind = false;
};

struct RunOptions {
  Vec x0;               ///< empty: the origin
  bool blind = false;   ///< no reference: phi = ||grad r(x_f)||^2, gap = NaN
  bool timing = false;  ///< fill wall_ms (otherwise 0 so traces are byte-stable)
};

/// Reference quantities used for tracing. L1 is always required.
struct RunReference {
  double L1 = 0.0;
  Vec x_star;
  double r_star = 0.0;
};

/// N iterations of the constant-parameter method. Solver streams are drawn
/// from the federation's RngPolicy, so a run is a function of its seed.
RunTrace run_aseg(Federation& fed, const RunReference& ref, const AsegParams& params,
                  const SolverConfig& solver, const RunOptions& opt = {});

/// Convex variant: x_g^k = tau_{k+1} x^k + (1 - tau_{k+1}) x_f^k, x^{k+1} = x^k - eta_{k+1} t_k.
/// phi = ||x^k - x*||^2 + (theta / tau_k^2) gap.
RunTrace run_aseg_convex(Federation& fed, const RunReference& ref, const ConvexSchedule& sched,
                         const SolverConfig& solver, const RunOptions& opt = {});

}  // namespace aseg

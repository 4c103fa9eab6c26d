#pragma once

// The server-side proximal subproblem
//
//   A(x) = <s, x - x_g> + ||x - x_g||^2 / (2 theta) + r_1(x)
//
// and the inexact solvers used to produce the extrapolation point x_f.
// A is (1/theta)-strongly convex and L_A = 1/theta + L1 smooth.

#include <cstdint>
#include <string>
#include <vector>

#include "aseg/problem.hpp"

namespace aseg {

struct SubproblemSpec {
  Vec s;
  Vec x_g;
  double theta = 1.0;
  const Objective* server = nullptr;  ///< r_1; not owned
  double L1 = 0.0;                    ///< smoothness of r_1

  double L_A() const { return 1.0 / theta + L1; }
  double mu_A() const { return 1.0 / theta; }
  std::size_t dim() const { return x_g.size(); }
  /// Throws std::invalid_argument on theta <= 0, a missing server or a size mismatch.
  void validate() const;
};

double sub_value(const SubproblemSpec& spec, ConstVecView x);
Vec sub_grad(const SubproblemSpec& spec, ConstVecView x);
void sub_grad(const SubproblemSpec& spec, ConstVecView x, VecView out);

/// Same as sub_grad with grad r_1 replaced by the mean of `minibatch`
/// sampled component gradients. minibatch == 0 means the full gradient.
void sub_grad_stochastic(const SubproblemSpec& spec, ConstVecView x, std::size_t minibatch,
                         Rng& rng, VecView out);

enum class SolverKind { SGD, SVRG, SARAH, Exact };
enum class StepSchedule { Constant, DecreasingOpt };

struct StopPolicy {
  enum class Kind { FixedIters, GradSurrogate } kind = Kind::FixedIters;
  double delta = 0.0;  ///< similarity constant for GradSurrogate

  static StopPolicy fixed() { return {}; }
  static StopPolicy surrogate(double delta) { return {Kind::GradSurrogate, delta}; }
};

struct SolverConfig {
  SolverKind kind = SolverKind::SVRG;
  double gamma = 0.0;          ///< <= 0 selects 1/(2 L_A) for SGD, 1/(16 L_A) for SVRG/SARAH
  std::size_t epoch = 0;       ///< J (SVRG/SARAH); 0 picks the smallest J with epoch factor <= 0.5
  std::size_t iters = 10;      ///< T: steps (SGD) or epochs (SVRG/SARAH)
  std::size_t minibatch = 1;   ///< 0 = full server gradient
  StepSchedule schedule = StepSchedule::Constant;
  double sigma1_sq = -1.0;     ///< negative: estimated empirically when needed
  bool last_iterate = false;   ///< SVRG: return the last inner iterate instead of the epoch mean
  StopPolicy stop;
  double exact_tol = 1e-13;    ///< Exact: stop once ||grad A|| <= exact_tol
  std::size_t exact_max_iter = 200000;
};

std::string to_string(SolverKind kind);
SolverKind parse_solver_kind(const std::string& s);
std::string to_string(StepSchedule s);
StepSchedule parse_step_schedule(const std::string& s);

struct SolveResult {
  Vec x;
  double grad_norm_sq = 0.0;  ///< ||grad A(x)||^2 at the returned point
  std::size_t steps = 0;      ///< inner steps (SGD/Exact) or epochs (SVRG/SARAH) taken
  std::size_t grad_evals = 0; ///< component gradient evaluations
  bool stopped_early = false; ///< the surrogate criterion fired
  double sigma1_sq = -1.0;    ///< set when the solver needed an estimate
};

/// Step size for iteration t of T under DecreasingOpt: 1/(2 L_A) for the first
/// half, then min{1/(2 L_A), 2 / (mu_A (4 L_A theta + t - t0))}.
double sgd_step(const SubproblemSpec& spec, const SolverConfig& cfg, std::size_t t);

SolveResult sgd_solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng);
SolveResult svrg_solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng);
SolveResult sarah_solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng);
/// Accelerated full-gradient descent to cfg.exact_tol (or the surrogate).
SolveResult exact_solve(const SubproblemSpec& spec, const SolverConfig& cfg);
SolveResult solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng);

/// gamma with the per-kind default applied.
double resolve_gamma(const SubproblemSpec& spec, const SolverConfig& cfg);
/// J with the auto rule applied; throws ConfigError when no J reaches the target.
std::size_t resolve_epoch(const SubproblemSpec& spec, const SolverConfig& cfg);

/// Per-epoch bound 2(1/mu_A + 2 J gamma^2 L_A) / (J gamma (1 - 2 gamma L_A))
/// on the function gap, with the subproblem's own modulus mu_A = 1/theta.
double svrg_epoch_factor(double mu_A, double L_A, double gamma, std::size_t J);

/// True iff ||grad A(x)|| <= (3 delta / sqrt(11)) ||grad A(x_g)|| / L_A,
/// which implies ||grad A(x)||^2 <= (9 delta^2 / 11) ||x_g - argmin A||^2.
bool stop_surrogate_check(const SubproblemSpec& spec, ConstVecView x, double delta);

/// Mean of ||g_i - grad A(x_g)||^2 over `draws` minibatch gradients at x_g.
double estimate_sigma1_sq(const SubproblemSpec& spec, std::size_t minibatch, Rng& rng,
                          int draws = 100);

/// Distribution of the random inner-loop length, always with mean `mean`.
struct TLaw {
  enum class Kind { PointMass, Geometric, Uniform } kind = Kind::Geometric;
  double mean = 10.0;
  std::size_t draw(Rng& rng) const;
};

struct LooplessReport {
  std::size_t A = 0;
  int trials = 0;
  double mean_fixed = 0.0;
  double mean_random = 0.0;
  double se_fixed = 0.0;
  double se_random = 0.0;
  double se_diff = 0.0;
  double mean_T_random = 0.0;  ///< realized average loop length of the random arm
  double z = 0.0;              ///< paired statistic for mean_random - mean_fixed
  bool low_confidence = false; ///< fewer than 10 trials
  bool random_not_better() const { return z >= 1.6448536269514722; }
};

/// Runs the solver with T = round(law.mean) and with T ~ law, `trials` times
/// each, and compares the final ||grad A||^2. Both arms of a trial share the
/// solver's random stream, so the comparison is paired.
LooplessReport loopless_compare(const SubproblemSpec& spec, const SolverConfig& cfg,
                                const TLaw& law, int trials, std::uint64_t seed);

}  // namespace aseg

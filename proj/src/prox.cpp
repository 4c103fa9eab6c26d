#include "aseg/prox.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "aseg/kernels.hpp"

namespace aseg {

void SubproblemSpec::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw std::invalid_argument("subproblem: theta must be positive");
  if (server == nullptr) throw std::invalid_argument("subproblem: no server objective");
  check_dim(s.size(), server->dim(), "subproblem s");
  check_dim(x_g.size(), server->dim(), "subproblem x_g");
}

double sub_value(const SubproblemSpec& spec, ConstVecView x) {
  spec.validate();
  check_dim(x.size(), spec.dim(), "sub_value");
  double lin = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - spec.x_g[i];
    lin += spec.s[i] * dx;
    sq += dx * dx;
  }
  return lin + sq / (2.0 * spec.theta) + spec.server->value(x);
}

void sub_grad(const SubproblemSpec& spec, ConstVecView x, VecView out) {
  spec.validate();
  check_dim(x.size(), spec.dim(), "sub_grad");
  spec.server->gradient(x, out);
  const double inv = 1.0 / spec.theta;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += spec.s[i] + (x[i] - spec.x_g[i]) * inv;
}

Vec sub_grad(const SubproblemSpec& spec, ConstVecView x) {
  Vec g(spec.dim());
  sub_grad(spec, x, g);
  return g;
}

namespace {

// out = (x - x_g)/theta + s
void prox_part(const SubproblemSpec& spec, ConstVecView x, VecView out) {
  const double inv = 1.0 / spec.theta;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = spec.s[i] + (x[i] - spec.x_g[i]) * inv;
}

// out += (1/b) sum of b component gradients of r_1 at x (and minus the same
// components at y when y is given).
void add_minibatch(const SubproblemSpec& spec, ConstVecView x, const Vec* y, std::size_t b,
                   Rng& rng, VecView out) {
  const double w = 1.0 / static_cast<double>(b);
  for (std::size_t j = 0; j < b; ++j) {
    const auto c = spec.server->sample_component(rng);
    spec.server->add_component_grad(c, x, w, out);
    if (y) spec.server->add_component_grad(c, *y, -w, out);
  }
}

struct Guard {
  const SubproblemSpec& spec;
  double limit;

  explicit Guard(const SubproblemSpec& sp, double g0_norm)
      : spec(sp),
        limit(1e6 * std::max(sp.theta * g0_norm,
                             1e-3 * (1.0 + std::sqrt(kernels::nrm2sq(sp.x_g))))) {}

  void check(ConstVecView x, std::size_t step) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double dx = x[i] - spec.x_g[i];
      d2 += dx * dx;
    }
    if (!std::isfinite(d2) || std::sqrt(d2) > limit)
      throw DivergenceError("subproblem solver diverged at inner step " + std::to_string(step) +
                            " (distance to x_g " + std::to_string(std::sqrt(d2)) + ")");
  }
};

bool surrogate_fires(const SubproblemSpec& spec, const SolverConfig& cfg, double g0_norm,
                     ConstVecView grad) {
  if (cfg.stop.kind != StopPolicy::Kind::GradSurrogate) return false;
  const double thr = 3.0 * cfg.stop.delta / std::sqrt(11.0) * g0_norm / spec.L_A();
  return std::sqrt(kernels::nrm2sq(grad)) <= thr;
}

void validate_stop(const StopPolicy& stop) {
  if (stop.kind == StopPolicy::Kind::GradSurrogate && !(stop.delta > 0.0))
    throw ConfigError("surrogate stopping needs delta > 0");
}

SolveResult finish(const SubproblemSpec& spec, Vec x, SolveResult r) {
  r.grad_norm_sq = kernels::nrm2sq(sub_grad(spec, x));
  r.x = std::move(x);
  return r;
}

}  // namespace

void sub_grad_stochastic(const SubproblemSpec& spec, ConstVecView x, std::size_t minibatch,
                         Rng& rng, VecView out) {
  if (minibatch == 0) {
    sub_grad(spec, x, out);
    return;
  }
  spec.validate();
  check_dim(x.size(), spec.dim(), "sub_grad_stochastic");
  prox_part(spec, x, out);
  add_minibatch(spec, x, nullptr, minibatch, rng, out);
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::SGD:
      return "sgd";
    case SolverKind::SVRG:
      return "svrg";
    case SolverKind::SARAH:
      return "sarah";
    case SolverKind::Exact:
      return "exact";
  }
  return "svrg";
}

SolverKind parse_solver_kind(const std::string& s) {
  if (s == "sgd") return SolverKind::SGD;
  if (s == "svrg") return SolverKind::SVRG;
  if (s == "sarah") return SolverKind::SARAH;
  if (s == "exact") return SolverKind::Exact;
  throw ConfigError("unknown solver kind '" + s + "' (expected sgd, svrg, sarah or exact)");
}

std::string to_string(StepSchedule s) {
  return s == StepSchedule::Constant ? "constant" : "decreasing";
}

StepSchedule parse_step_schedule(const std::string& s) {
  if (s == "constant") return StepSchedule::Constant;
  if (s == "decreasing") return StepSchedule::DecreasingOpt;
  throw ConfigError("unknown step schedule '" + s + "' (expected constant or decreasing)");
}

double resolve_gamma(const SubproblemSpec& spec, const SolverConfig& cfg) {
  if (cfg.gamma > 0.0) return cfg.gamma;
  const double L_A = spec.L_A();
  return cfg.kind == SolverKind::SGD ? 1.0 / (2.0 * L_A) : 1.0 / (16.0 * L_A);
}

double svrg_epoch_factor(double mu_A, double L_A, double gamma, std::size_t J) {
  const double Jd = static_cast<double>(J);
  const double denom = Jd * gamma * (1.0 - 2.0 * gamma * L_A);
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 * (1.0 / mu_A + 2.0 * Jd * gamma * gamma * L_A) / denom;
}

std::size_t resolve_epoch(const SubproblemSpec& spec, const SolverConfig& cfg) {
  if (cfg.epoch > 0) return cfg.epoch;
  const double gamma = resolve_gamma(spec, cfg);
  const double L_A = spec.L_A();
  const double one_minus = 1.0 - 2.0 * gamma * L_A;
  const double b = 4.0 * gamma * L_A / one_minus;
  if (!(one_minus > 0.0) || b >= 0.5)
    throw ConfigError("step gamma = " + std::to_string(gamma) +
                      " is too large for an epoch factor of 0.5 (need gamma * L_A well below 1/2)");
  const double a = 2.0 / (spec.mu_A() * gamma * one_minus);
  return static_cast<std::size_t>(std::ceil(a / (0.5 - b)));
}

double sgd_step(const SubproblemSpec& spec, const SolverConfig& cfg, std::size_t t) {
  const double base = resolve_gamma(spec, cfg);
  if (cfg.schedule == StepSchedule::Constant) return base;
  const double L_A = spec.L_A();
  const std::size_t t0 = (cfg.iters + 1) / 2;
  const double cap = std::min(base, 1.0 / (2.0 * L_A));
  if (t < t0) return cap;
  const double decay =
      2.0 / (spec.mu_A() * (4.0 * L_A * spec.theta + static_cast<double>(t - t0)));
  return std::min(cap, decay);
}

SolveResult sgd_solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng) {
  spec.validate();
  validate_stop(cfg.stop);
  const double gamma = resolve_gamma(spec, cfg);
  if (gamma > 1.0 / (2.0 * spec.L_A()) * (1.0 + 1e-12))
    throw ConfigError("SGD step gamma = " + std::to_string(gamma) + " exceeds 1/(2 L_A) = " +
                      std::to_string(1.0 / (2.0 * spec.L_A())));
  const std::size_t d = spec.dim();
  Vec x = spec.x_g, g(d);
  SolveResult r;
  const bool use_stop = cfg.stop.kind == StopPolicy::Kind::GradSurrogate;
  const double g0 = std::sqrt(kernels::nrm2sq(sub_grad(spec, x)));
  const Guard guard(spec, g0);
  const std::size_t check_every = 10;
  for (std::size_t t = 0; t < cfg.iters; ++t) {
    sub_grad_stochastic(spec, x, cfg.minibatch, rng, g);
    kernels::axpy(-sgd_step(spec, cfg, t), g, x);
    r.grad_evals += cfg.minibatch == 0 ? spec.server->num_rows() : cfg.minibatch;
    ++r.steps;
    guard.check(x, t);
    if (use_stop && (t + 1) % check_every == 0 && surrogate_fires(spec, cfg, g0, sub_grad(spec, x))) {
      r.stopped_early = true;
      break;
    }
  }
  return finish(spec, std::move(x), r);
}

namespace {

void check_vr_config(const SubproblemSpec& spec, double gamma,
                     std::size_t J) {
  const double f = svrg_epoch_factor(spec.mu_A(), spec.L_A(), gamma, J);
  if (!(f < 1.0))
    throw ConfigError("epoch contraction factor " + std::to_string(f) +
                      " >= 1 for epoch J = " + std::to_string(J) + " and step gamma = " +
                      std::to_string(gamma) + " (L_A = " + std::to_string(spec.L_A()) +
                      ", theta = " + std::to_string(spec.theta) + ")");
}

}  // namespace

SolveResult svrg_solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng) {
  spec.validate();
  validate_stop(cfg.stop);
  const double gamma = resolve_gamma(spec, cfg);
  const std::size_t J = resolve_epoch(spec, cfg);
  check_vr_config(spec, gamma, J);
  const std::size_t d = spec.dim();
  const std::size_t b = std::max<std::size_t>(cfg.minibatch, 1);
  Vec x = spec.x_g, snap(d), snap_grad(d), v(d), avg(d);
  SolveResult r;
  const double g0 = std::sqrt(kernels::nrm2sq(sub_grad(spec, x)));
  const Guard guard(spec, g0);
  for (std::size_t e = 0; e < cfg.iters; ++e) {
    snap = x;
    spec.server->gradient(snap, snap_grad);
    r.grad_evals += spec.server->num_rows();
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      prox_part(spec, x, v);
      kernels::axpy(1.0, snap_grad, v);
      add_minibatch(spec, x, &snap, b, rng, v);
      kernels::axpy(-gamma, v, x);
      kernels::axpy(1.0 / static_cast<double>(J), x, avg);
      r.grad_evals += 2 * b;
    }
    if (!cfg.last_iterate) x = avg;
    ++r.steps;
    guard.check(x, e);
    if (surrogate_fires(spec, cfg, g0, sub_grad(spec, x))) {
      r.stopped_early = true;
      break;
    }
  }
  return finish(spec, std::move(x), r);
}

SolveResult sarah_solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng) {
  spec.validate();
  validate_stop(cfg.stop);
  const double gamma = resolve_gamma(spec, cfg);
  const std::size_t J = resolve_epoch(spec, cfg);
  check_vr_config(spec, gamma, J);
  const std::size_t d = spec.dim();
  const std::size_t b = std::max<std::size_t>(cfg.minibatch, 1);
  Vec x = spec.x_g, prev(d), v(d), fresh(d);
  SolveResult r;
  const double g0 = std::sqrt(kernels::nrm2sq(sub_grad(spec, x)));
  const Guard guard(spec, g0);
  for (std::size_t e = 0; e < cfg.iters; ++e) {
    sub_grad(spec, x, v);
    r.grad_evals += spec.server->num_rows();
    prev = x;
    kernels::axpy(-gamma, v, x);
    for (std::size_t j = 1; j < J; ++j) {
      // v <- v + grad A_i(x) - grad A_i(prev); the prox part differs by (x - prev)/theta.
      const double inv = 1.0 / spec.theta;
      for (std::size_t i = 0; i < d; ++i) fresh[i] = (x[i] - prev[i]) * inv;
      add_minibatch(spec, x, &prev, b, rng, fresh);
      kernels::axpy(1.0, fresh, v);
      prev = x;
      kernels::axpy(-gamma, v, x);
      r.grad_evals += 2 * b;
    }
    ++r.steps;
    guard.check(x, e);
    if (surrogate_fires(spec, cfg, g0, sub_grad(spec, x))) {
      r.stopped_early = true;
      break;
    }
  }
  return finish(spec, std::move(x), r);
}

SolveResult exact_solve(const SubproblemSpec& spec, const SolverConfig& cfg) {
  spec.validate();
  validate_stop(cfg.stop);
  const std::size_t d = spec.dim();
  const double L_A = spec.L_A();
  const double kappa = L_A / spec.mu_A();
  const double beta = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
  Vec x = spec.x_g, x_prev = x, y(d), gy(d), gx(d);
  sub_grad(spec, x, gx);
  const double g0 = std::sqrt(kernels::nrm2sq(gx));
  SolveResult r;
  Vec best = x;
  double best_norm = g0;
  // Roundoff in the 1/theta term can keep ||grad A|| above exact_tol for
  // small theta; give up once the best norm stalls well past the AGD horizon.
  const auto patience = static_cast<std::size_t>(10.0 * std::ceil(std::sqrt(kappa))) + 50;
  std::size_t last_gain = 0;
  for (std::size_t t = 0; t < cfg.exact_max_iter; ++t) {
    const double gn = std::sqrt(kernels::nrm2sq(gx));
    if (gn < best_norm) {
      if (gn < 0.99 * best_norm) last_gain = t;
      best_norm = gn;
      best = x;
    }
    if (gn <= cfg.exact_tol || t - last_gain > patience) break;
    if (surrogate_fires(spec, cfg, g0, gx)) {
      r.stopped_early = true;
      break;
    }
    for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + beta * (x[i] - x_prev[i]);
    sub_grad(spec, y, gy);
    x_prev = x;
    for (std::size_t i = 0; i < d; ++i) x[i] = y[i] - gy[i] / L_A;
    // Adaptive restart: drop the momentum when it points uphill.
    double up = 0.0;
    for (std::size_t i = 0; i < d; ++i) up += gy[i] * (x[i] - x_prev[i]);
    if (up > 0.0) x_prev = x;
    sub_grad(spec, x, gx);
    r.grad_evals += 2 * spec.server->num_rows();
    ++r.steps;
    if (!std::isfinite(gx[0])) throw DivergenceError("exact subproblem solve diverged");
  }
  const double gn = std::sqrt(kernels::nrm2sq(gx));
  if (gn > best_norm) x = best;
  return finish(spec, std::move(x), r);
}

SolveResult solve(const SubproblemSpec& spec, const SolverConfig& cfg, Rng& rng) {
  switch (cfg.kind) {
    case SolverKind::SGD:
      return sgd_solve(spec, cfg, rng);
    case SolverKind::SVRG:
      return svrg_solve(spec, cfg, rng);
    case SolverKind::SARAH:
      return sarah_solve(spec, cfg, rng);
    case SolverKind::Exact:
      return exact_solve(spec, cfg);
  }
  throw std::logic_error("unreachable solver kind");
}

bool stop_surrogate_check(const SubproblemSpec& spec, ConstVecView x, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("stop_surrogate_check: delta must be > 0");
  const double gx = std::sqrt(kernels::nrm2sq(sub_grad(spec, x)));
  const double g0 = std::sqrt(kernels::nrm2sq(sub_grad(spec, spec.x_g)));
  return gx <= 3.0 * delta / std::sqrt(11.0) * g0 / spec.L_A();
}

double estimate_sigma1_sq(const SubproblemSpec& spec, std::size_t minibatch, Rng& rng, int draws) {
  if (draws < 1) throw std::invalid_argument("estimate_sigma1_sq: draws must be >= 1");
  const Vec full = sub_grad(spec, spec.x_g);
  Vec g(spec.dim());
  double acc = 0.0;
  for (int k = 0; k < draws; ++k) {
    sub_grad_stochastic(spec, spec.x_g, std::max<std::size_t>(minibatch, 1), rng, g);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= full[i];
    acc += kernels::nrm2sq(g);
  }
  return acc / draws;
}

std::size_t TLaw::draw(Rng& rng) const {
  if (!(mean >= 1.0) || !std::isfinite(mean))
    throw std::invalid_argument("TLaw: mean must be finite and >= 1");
  switch (kind) {
    case Kind::PointMass:
      return static_cast<std::size_t>(std::llround(mean));
    case Kind::Geometric: {
      // Support {1, 2, ...}, success probability 1/mean.
      std::geometric_distribution<std::size_t> gd(1.0 / mean);
      return gd(rng) + 1;
    }
    case Kind::Uniform: {
      const auto hi = static_cast<std::size_t>(std::llround(2.0 * mean - 1.0));
      std::uniform_int_distribution<std::size_t> ud(1, std::max<std::size_t>(hi, 1));
      return ud(rng);
    }
  }
  return 1;
}

LooplessReport loopless_compare(const SubproblemSpec& spec, const SolverConfig& cfg,
                                const TLaw& law, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("loopless_compare: trials must be >= 1");
  const RngPolicy streams(seed);
  LooplessReport rep;
  rep.A = static_cast<std::size_t>(std::llround(law.mean));
  rep.trials = trials;
  rep.low_confidence = trials < 10;
  std::vector<double> fixed, random, diff;
  double t_sum = 0.0;
  for (int k = 0; k < trials; ++k) {
    Rng law_rng = streams.named(0x100B, static_cast<std::uint64_t>(k));
    const std::size_t T = law.draw(law_rng);
    t_sum += static_cast<double>(T);

    SolverConfig c = cfg;
    c.iters = rep.A;
    Rng r1 = streams.named(0x501E, static_cast<std::uint64_t>(k));
    fixed.push_back(solve(spec, c, r1).grad_norm_sq);

    c.iters = T;
    Rng r2 = streams.named(0x501E, static_cast<std::uint64_t>(k));
    random.push_back(solve(spec, c, r2).grad_norm_sq);
    diff.push_back(random.back() - fixed.back());
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double a : v) m += a;
    m /= n;
    double ss = 0.0;
    for (double a : v) ss += (a - m) * (a - m);
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return std::pair{m, se};
  };
  std::tie(rep.mean_fixed, rep.se_fixed) = mean_se(fixed);
  std::tie(rep.mean_random, rep.se_random) = mean_se(random);
  double md;
  std::tie(md, rep.se_diff) = mean_se(diff);
  rep.mean_T_random = t_sum / trials;
  rep.z = rep.se_diff > 0.0 ? md / rep.se_diff : 0.0;
  return rep;
}

}  // namespace aseg

#include "aseg/aseg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>

#include "aseg/kernels.hpp"

namespace aseg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSolverTag = 0x5017E5;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(name) + " must be positive and finite (got " + num(v) + ")");
}

AsegParams finish_preset(double mu, double theta, double tau, std::size_t B) {
  AsegParams p;
  p.theta = theta;
  p.tau = tau;
  p.alpha = mu / 3.0;
  p.eta = std::min(1.0 / (3.0 * p.alpha), theta / (3.0 * tau));
  p.B = B;
  p.validate();
  return p;
}

double sq_dist(ConstVecView a, ConstVecView b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

bool all_finite(ConstVecView x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

struct Hooks {
  std::size_t N = 0;
  std::function<double(std::size_t k)> tau;  // weight on x^k when forming x_g^k
  std::function<double(std::size_t k, double dist_sq, double gap)> phi;
  std::function<double(std::size_t k)> theta;
  // x^{k+1} from x^k, x_f^{k+1} and t_k, in place.
  std::function<void(std::size_t k, Vec& x, const Vec& x_f_next, const Vec& t)> update;
};

RunTrace drive(Federation& fed, const RunReference& ref, const SolverConfig& solver,
               const RunOptions& opt, const Hooks& h) {
  const std::size_t d = fed.dim();
  const Objective& global = fed.global();
  const bool blind = opt.blind;
  if (!blind) check_dim(ref.x_star.size(), d, "run: reference x*");
  if (!opt.x0.empty()) check_dim(opt.x0.size(), d, "run: x0");
  if (!(ref.L1 >= 0.0)) throw ConfigError("L1 must be >= 0");

  fed.reset_ledger();
  const auto t_start = std::chrono::steady_clock::now();

  RunTrace tr;
  tr.blind = blind;
  Vec x = opt.x0.empty() ? Vec(d, 0.0) : opt.x0;
  Vec x_f = x;
  Vec x_g(d);

  double blowup_ref = 0.0;
  auto record = [&](std::size_t k, double dist_g) {
    TraceRow row;
    row.k = k;
    const Vec g = global.gradient(x_f);
    row.grad_norm_sq = kernels::nrm2sq(g);
    if (blind) {
      row.gap = kNaN;
      row.dist_sq = kNaN;
      row.phi = row.grad_norm_sq;
      tr.dist_f_sq.push_back(kNaN);
    } else {
      row.gap = global.value_difference(x_f, ref.x_star);
      row.dist_sq = sq_dist(x, ref.x_star);
      row.phi = h.phi(k, row.dist_sq, row.gap);
      tr.dist_f_sq.push_back(sq_dist(x_f, ref.x_star));
    }
    tr.dist_g_sq.push_back(dist_g);
    const auto& led = fed.ledger();
    row.contacts = led.contacts;
    row.normalized_rounds = led.normalized_rounds;
    if (opt.timing)
      row.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
              .count();
    tr.rows.push_back(row);
    if (k == 0) blowup_ref = std::max(std::abs(row.phi), 1e-300);
    if (!all_finite(x) || !all_finite(x_f) || !std::isfinite(row.phi) ||
        std::abs(row.phi) > 1e12 * blowup_ref + 1e12)
      throw DivergenceError("iterates diverged at iteration " + std::to_string(k) +
                                " (phi = " + num(row.phi) + ")",
                            static_cast<long>(k));
  };

  record(0, kNaN);
  const RngPolicy& streams = fed.rng_policy();
  for (std::size_t k = 0; k < h.N; ++k) {
    const double tau = h.tau(k);
    for (std::size_t i = 0; i < d; ++i) x_g[i] = tau * x[i] + (1.0 - tau) * x_f[i];

    const auto first = fed.sample_clients(1, k);
    SubproblemSpec sub;
    sub.s = fed.aggregate_s(k, first, x_g);
    sub.x_g = x_g;
    sub.theta = h.theta(k);
    sub.server = &fed.server();
    sub.L1 = ref.L1;

    Rng solver_rng = streams.named(kSolverTag, k);
    SolveResult res;
    try {
      res = solve(sub, solver, solver_rng);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " in outer iteration " + std::to_string(k),
                            static_cast<long>(k));
    }

    const auto second = fed.sample_clients(2, k);
    const Vec t = fed.aggregate_t(k, second, res.x);
    h.update(k, x, res.x, t);
    x_f = std::move(res.x);
    fed.finish_iteration();
    record(k + 1, blind ? kNaN : sq_dist(x_g, ref.x_star));
  }
  tr.x = std::move(x);
  tr.x_f = std::move(x_f);
  tr.ledger = fed.ledger();
  return tr;
}

}  // namespace

void AsegParams::validate() const {
  if (!(tau > 0.0 && tau <= 1.0))
    throw ConfigError("tau must lie in (0, 1] (got " + num(tau) + ")");
  require_positive(eta, "eta");
  require_positive(theta, "theta");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ConfigError("alpha must be non-negative (got " + num(alpha) + ")");
  if (B < 1) throw ConfigError("B must be >= 1");
  if (N < 1) throw ConfigError("N must be >= 1");
}

AsegParams tune_set1(double mu, double delta, std::optional<double> theta_opt) {
  require_positive(mu, "mu");
  require_positive(delta, "delta");
  const double cap = 1.0 / (3.0 * delta);
  double theta = cap;
  if (theta_opt) {
    require_positive(*theta_opt, "theta");
    if (*theta_opt > cap)
      throw ConfigError("theta = " + num(*theta_opt) + " exceeds 1/(3 delta) = " + num(cap));
    theta = *theta_opt;
  }
  const double tau = std::sqrt(mu * theta) / 3.0;
  if (tau > 1.0)
    throw ConfigError("tau = sqrt(mu theta)/3 = " + num(tau) + " exceeds 1; mu = " + num(mu) +
                      " is too large relative to delta = " + num(delta));
  AsegParams p = finish_preset(mu, theta, tau, 1);
  p.zeta = 0;
  return p;
}

double theta_cap_set2(double mu, double delta, std::size_t B) {
  const double b = static_cast<double>(B);
  return mu * mu * mu * b * b / (5184.0 * delta * delta * delta * delta);
}

AsegParams tune_set2(double mu, double delta, std::size_t B, std::optional<double> theta_opt) {
  require_positive(mu, "mu");
  require_positive(delta, "delta");
  if (B < 1) throw ConfigError("B must be >= 1");
  const double cap1 = 1.0 / (3.0 * delta);
  const double cap2 = theta_cap_set2(mu, delta, B);
  const double cap = std::min(cap1, cap2);
  double theta = cap;
  if (theta_opt) {
    require_positive(*theta_opt, "theta");
    if (*theta_opt > cap)
      throw ConfigError("theta = " + num(*theta_opt) + " exceeds min{1/(3 delta), mu^3 B^2/(5184 delta^4)} = " +
                        num(cap));
    theta = *theta_opt;
  }
  const double tau = std::sqrt(mu * theta);
  if (tau > 1.0)
    throw ConfigError("tau = sqrt(mu theta) = " + num(tau) + " exceeds 1");
  AsegParams p = finish_preset(mu, theta, tau, B);
  p.zeta = 1;
  return p;
}

long long b_threshold(double mu, double delta) {
  require_positive(mu, "mu");
  require_positive(delta, "delta");
  return static_cast<long long>(std::ceil(72.0 * std::pow(delta / mu, 1.5)));
}

ThetaChoice theta_schedule_strongly_convex(int preset, std::size_t B, double mu, double delta,
                                           std::size_t N, double Phi0, double sigma_sq) {
  if (preset != 1 && preset != 2) throw ConfigError("preset must be 1 or 2");
  if (N < 1) throw ConfigError("N must be >= 1");
  require_positive(mu, "mu");
  require_positive(delta, "delta");
  if (sigma_sq < 0.0) throw ConfigError("sigma^2 must be >= 0");
  const double b = static_cast<double>(B);
  const double n2 = static_cast<double>(N) * static_cast<double>(N);
  const double lead = preset == 1 ? 9.0 : 324.0;
  const double div = preset == 1 ? 36.0 : 1296.0;

  ThetaChoice c;
  if (sigma_sq == 0.0) {
    c.candidate = kInf;
  } else {
    const double arg = std::max(2.0, b * mu * n2 * Phi0 / (div * sigma_sq));
    const double l = std::log(arg);
    c.candidate = lead * l * l / (mu * n2);
  }
  const double cap1 = 1.0 / (3.0 * delta);
  if (preset == 1) {
    if (c.candidate <= cap1) {
      c.theta = c.candidate;
      c.branch = 1;
    } else {
      c.theta = cap1;
      c.branch = 2;
    }
    return c;
  }
  const double cap2 = theta_cap_set2(mu, delta, B);
  if (cap1 <= cap2) {
    c.branch = c.candidate <= cap1 ? 1 : 2;
    c.theta = std::min(c.candidate, cap1);
  } else {
    c.branch = c.candidate <= cap2 ? 3 : 4;
    c.theta = std::min(c.candidate, cap2);
  }
  return c;
}

ThetaChoice theta_convex(std::size_t B, double delta, std::size_t N, double dist0,
                         double sigma_sq) {
  require_positive(delta, "delta");
  if (sigma_sq < 0.0 || dist0 < 0.0) throw ConfigError("sigma^2 and ||x0 - x*|| must be >= 0");
  ThetaChoice c;
  const double n1 = static_cast<double>(N) + 1.0;
  c.candidate = sigma_sq == 0.0
                    ? kInf
                    : std::sqrt(static_cast<double>(B)) * dist0 /
                          (std::sqrt(3.0) * std::sqrt(sigma_sq) * std::pow(n1, 1.5));
  const double cap = 1.0 / (3.0 * delta);
  if (c.candidate <= cap) {
    c.theta = c.candidate;
    c.branch = 1;
  } else {
    c.theta = cap;
    c.branch = 2;
  }
  return c;
}

RunTrace run_aseg(Federation& fed, const RunReference& ref, const AsegParams& params,
                  const SolverConfig& solver, const RunOptions& opt) {
  params.validate();
  Hooks h;
  h.N = params.N;
  h.tau = [&](std::size_t) { return params.tau; };
  h.theta = [&](std::size_t) { return params.theta; };
  h.phi = [&](std::size_t, double dist_sq, double gap) {
    return params.tau / params.eta * dist_sq + 2.0 * gap;
  };
  h.update = [&](std::size_t, Vec& x, const Vec& x_f_next, const Vec& t) {
    const double ea = params.eta * params.alpha;
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = x[i] + ea * (x_f_next[i] - x[i]) - params.eta * t[i];
  };
  return drive(fed, ref, solver, opt, h);
}

RunTrace run_aseg_convex(Federation& fed, const RunReference& ref, const ConvexSchedule& sched,
                         const SolverConfig& solver, const RunOptions& opt) {
  require_positive(sched.theta, "theta");
  if (sched.N < 1) throw ConfigError("N must be >= 1");
  Hooks h;
  h.N = sched.N;
  h.tau = [](std::size_t k) { return ConvexSchedule::tau(k + 1); };
  h.theta = [&](std::size_t) { return sched.theta; };
  h.phi = [&](std::size_t k, double dist_sq, double gap) {
    const double tk = ConvexSchedule::tau(k);
    return dist_sq + sched.theta / (tk * tk) * gap;
  };
  h.update = [&](std::size_t k, Vec& x, const Vec&, const Vec& t) {
    kernels::axpy(-sched.eta(k + 1), t, x);
  };
  return drive(fed, ref, solver, opt, h);
}

}  // namespace aseg

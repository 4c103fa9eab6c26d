#include "aseg/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "aseg/kernels.hpp"
#include "aseg/spectral.hpp"

namespace aseg {

namespace {

void require_quadratic(const Objective& o, const char* who) {
  if (o.model().kind != LossKind::Quadratic)
    throw std::invalid_argument(std::string(who) + ": objective is not quadratic");
}

// ||H_a(x) - H_b(x)|| by a Krylov iteration.
SpectralEstimate hessian_difference_norm(const Objective& a, const Objective& b, ConstVecView x,
                                         double tol) {
  Vec tmp(a.dim());
  return spectral_norm(
      [&](ConstVecView in, VecView out) {
        a.hessian_vec(x, in, out);
        b.hessian_vec(x, in, tmp);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tmp[i];
      },
      a.dim(), tol, 200000);
}

}  // namespace

DeltaEstimate delta_quadratic_exact(const Objective& server, std::span<const Objective> nodes,
                                    double safety_factor, double tol) {
  require_quadratic(server, "delta_quadratic_exact");
  for (const auto& n : nodes) require_quadratic(n, "delta_quadratic_exact");
  const Objective global = Objective::average(nodes);
  const Vec origin(server.dim(), 0.0);
  DeltaEstimate est;
  est.method = DeltaMethod::ExactQuadratic;
  est.safety_factor = safety_factor;
  est.raw = hessian_difference_norm(server, global, origin, tol).value;
  est.value = est.raw * safety_factor;
  est.samples_used = 1;
  return est;
}

double delta_all_nodes_quadratic(std::span<const Objective> nodes, double tol) {
  const Objective global = Objective::average(nodes);
  const Vec origin(global.dim(), 0.0);
  double worst = 0.0;
  for (const auto& n : nodes) {
    require_quadratic(n, "delta_all_nodes_quadratic");
    worst = std::max(worst, hessian_difference_norm(n, global, origin, tol).value);
  }
  return worst;
}

double default_delta_radius(ConstVecView x_star) {
  return std::sqrt(kernels::nrm2sq(x_star)) / 10.0 + 0.1;
}

DeltaEstimate delta_logistic_sampled(const Objective& server, std::span<const Objective> nodes,
                                     ConstVecView x_star, int n_points, double radius,
                                     std::uint64_t seed, double safety_factor, double tol) {
  if (n_points < 1) throw std::invalid_argument("delta_logistic_sampled: n_points must be >= 1");
  check_dim(x_star.size(), server.dim(), "delta_logistic_sampled");
  const Objective global = Objective::average(nodes);
  const RngPolicy streams(seed);
  DeltaEstimate est;
  est.method = DeltaMethod::SampledLogistic;
  est.safety_factor = safety_factor;
  est.samples_used = n_points;
  Vec x(x_star.begin(), x_star.end());
  for (int i = 0; i < n_points; ++i) {
    if (i > 0) {
      Rng rng = streams.named(0xDE17A, static_cast<std::uint64_t>(i));
      std::normal_distribution<double> nd(0.0, radius);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = x_star[k] + nd(rng);
    }
    est.per_point.push_back(hessian_difference_norm(server, global, x, tol).value);
  }
  est.raw = *std::max_element(est.per_point.begin(), est.per_point.end());
  est.value = est.raw * safety_factor;
  return est;
}

double sigma_sim_sq(std::span<const Objective> nodes, ConstVecView x_star) {
  double worst = 0.0;
  for (const auto& n : nodes) worst = std::max(worst, kernels::nrm2sq(n.gradient(x_star)));
  return 2.0 * worst;
}

Prop1Report check_prop1(std::span<const Objective> nodes, const Objective& global, double delta,
                        ConstVecView x_star, std::span<const Vec> trial_points) {
  Prop1Report rep;
  rep.max_slack = -std::numeric_limits<double>::infinity();
  rep.min_margin = std::numeric_limits<double>::infinity();
  const double sim = sigma_sim_sq(nodes, x_star);
  Vec diff(global.dim());
  for (std::size_t p = 0; p < trial_points.size(); ++p) {
    const Vec& x = trial_points[p];
    const Vec gg = global.gradient(x);
    double dist_sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) dist_sq += (x[k] - x_star[k]) * (x[k] - x_star[k]);
    const double rhs = sim + 2.0 * delta * delta * dist_sq;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
      nodes[m].gradient(x, diff);
      for (std::size_t k = 0; k < diff.size(); ++k) diff[k] -= gg[k];
      const double lhs = kernels::nrm2sq(diff);
      ++rep.checks;
      rep.max_slack = std::max(rep.max_slack, lhs - rhs);
      rep.min_margin = std::min(rep.min_margin, rhs - lhs);
      if (lhs > rhs + 1e-9) rep.violations.push_back({m, p, lhs, rhs});
    }
  }
  return rep;
}

ProblemConstants estimate_constants(std::span<const Objective> nodes, const Objective& global,
                                    const ConstantsOptions& opts) {
  if (nodes.empty()) throw std::invalid_argument("estimate_constants: no nodes");
  const Objective& server = nodes.front();
  ProblemConstants c;
  c.L = estimate_smoothness(global).value;
  c.L1 = estimate_smoothness(server).value;
  c.mu = estimate_strong_convexity(global);
  try {
    auto ref = solve_reference(global, opts.reference_tol);
    c.x_star = std::move(ref.x);
    c.reference_grad_norm = ref.grad_norm;
  } catch (const ReferenceSolveError& e) {
    c.x_star = e.best_iterate();
    c.reference_grad_norm = e.best_grad_norm();
  }
  c.r_star = global.value(c.x_star);
  c.sigma_sim_sq = sigma_sim_sq(nodes, c.x_star);
  if (global.model().kind == LossKind::Quadratic) {
    c.delta = delta_quadratic_exact(server, nodes, opts.safety_factor).value;
  } else {
    const double radius =
        opts.delta_radius >= 0 ? opts.delta_radius : default_delta_radius(c.x_star);
    c.delta = delta_logistic_sampled(server, nodes, c.x_star, opts.delta_points, radius, opts.seed,
                                     opts.safety_factor)
                  .value;
  }
  return c;
}

}  // namespace aseg

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aseg/problem.hpp"

namespace aseg {

enum class DeltaMethod { ExactQuadratic, SampledLogistic };

struct DeltaEstimate {
  double value = 0.0;         ///< already multiplied by safety_factor
  double raw = 0.0;           ///< before the safety factor
  DeltaMethod method = DeltaMethod::ExactQuadratic;
  int samples_used = 0;
  double safety_factor = 1.5;
  std::vector<double> per_point;  ///< sampled method: raw norm at each point
};

inline constexpr double kDeltaSafetyFactor = 1.5;

/// ||H_server - H_global|| for quadratics by a Krylov iteration on the
/// matrix-free difference operator, then times safety_factor.
DeltaEstimate delta_quadratic_exact(const Objective& server, std::span<const Objective> nodes,
                                    double safety_factor = kDeltaSafetyFactor, double tol = 1e-10);

/// Same quantity, but for the worst node rather than the server.
double delta_all_nodes_quadratic(std::span<const Objective> nodes, double tol = 1e-10);

/// Default neighborhood radius: ||x*|| / 10 + 0.1.
double default_delta_radius(ConstVecView x_star);

/// Max over sampled points of ||H_server(x) - H_global(x)||, times
/// safety_factor. Point 0 is x* itself; point i >= 1 is x* + radius * g_i
/// with g_i standard normal drawn from its own seeded stream.
DeltaEstimate delta_logistic_sampled(const Objective& server, std::span<const Objective> nodes,
                                     ConstVecView x_star, int n_points, double radius,
                                     std::uint64_t seed,
                                     double safety_factor = kDeltaSafetyFactor,
                                     double tol = 1e-9);

/// 2 * max_m ||grad r_m(x*)||^2
double sigma_sim_sq(std::span<const Objective> nodes, ConstVecView x_star);

struct Prop1Violation {
  std::size_t node;
  std::size_t point;
  double lhs;
  double rhs;
};

struct Prop1Report {
  double max_slack = 0.0;  ///< max over (node, point) of lhs - rhs (<= 0 when holding)
  double min_margin = 0.0; ///< min over (node, point) of rhs - lhs
  std::size_t checks = 0;
  std::vector<Prop1Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks ||grad r_m(x) - grad r(x)||^2 <= sigma_sim^2 + 2 delta^2 ||x - x*||^2
/// (+1e-9) at every trial point for every node.
Prop1Report check_prop1(std::span<const Objective> nodes, const Objective& global, double delta,
                        ConstVecView x_star, std::span<const Vec> trial_points);

struct ConstantsOptions {
  double reference_tol = 1e-12;
  int delta_points = 100;
  double delta_radius = -1.0;  ///< negative: default_delta_radius
  double safety_factor = kDeltaSafetyFactor;
  std::uint64_t seed = 1;
};

/// mu, L, L1, delta, sigma_sim^2 and the reference solution for a layout
/// where nodes[0] is the server.
ProblemConstants estimate_constants(std::span<const Objective> nodes, const Objective& global,
                                    const ConstantsOptions& opts = {});

}  // namespace aseg

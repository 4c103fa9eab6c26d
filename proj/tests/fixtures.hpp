#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "aseg/dataio.hpp"
#include "aseg/similarity.hpp"

namespace fixtures {

using aseg::Objective;
using aseg::Vec;

struct Fixture {
  std::vector<Objective> nodes;
  std::shared_ptr<const Objective> global;
  aseg::ProblemConstants c;  ///< delta carries the 1.5 safety factor
  double delta_raw = 0.0;    ///< ||H_server - H_global||
  double delta_all = 0.0;    ///< max over nodes
};

inline Fixture from_nodes(std::vector<Objective> raw, double lambda_frac) {
  Fixture f;
  const double L0 = aseg::estimate_smoothness(Objective::average(raw)).value;
  for (auto& n : raw) f.nodes.push_back(n.with_lambda(lambda_frac * L0));
  f.global = std::make_shared<const Objective>(Objective::average(f.nodes));
  f.c = aseg::estimate_constants(f.nodes, *f.global);
  f.delta_raw = f.c.delta / aseg::kDeltaSafetyFactor;
  if (f.nodes.front().model().kind == aseg::LossKind::Quadratic)
    f.delta_all = aseg::delta_all_nodes_quadratic(f.nodes);
  return f;
}

/// d = 30, M = 20 synthetic quadratic with lambda = L/100.
inline Fixture standard(std::uint64_t seed = 1, double hetero = 0.1, std::size_t M = 20,
                        std::size_t d = 30, std::size_t points = 200) {
  aseg::SynthSpec s;
  s.d = d;
  s.M = M;
  s.points_per_node = points;
  s.hetero = hetero;
  s.seed = seed;
  return from_nodes(aseg::gen_synthetic_quadratic(s).nodes, 0.01);
}

inline std::string data_path(const std::string& name) {
  return std::string(ASEG_TEST_DATA) + "/" + name;
}

inline Vec gaussian(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(d);
  for (auto& x : v) x = nd(rng);
  return v;
}

inline double dist_sq(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double norm(const Vec& a) {
  double s = 0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace fixtures

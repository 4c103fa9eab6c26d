// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aseg/aseg.hpp"
#include "aseg/dense.hpp"
#include "aseg/similarity.hpp"
#include "fixtures.hpp"

using namespace aseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunReference reference(const fixtures::Fixture& f) {
  return RunReference{f.c.L1, f.c.x_star, f.c.r_star};
}

const SolverConfig kExact{.kind = SolverKind::Exact};
const SamplingPlan kFull{.mode = Participation::Full};

Vec diff(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

double norm_sq(const Vec& v) {
  double s = 0;
  for (double a : v) s += a * a;
  return s;
}

double rel_err(const Vec& a, const Vec& b) {
  return std::sqrt(norm_sq(diff(a, b))) / std::max(std::sqrt(norm_sq(b)), 1e-8);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// Exact subproblem minimizer for a quadratic server.
Vec dense_argmin(const SubproblemSpec& spec) {
  const auto d = static_cast<Eigen::Index>(spec.dim());
  Eigen::MatrixXd H = dense_hessian(*spec.server, spec.x_g);
  H += Eigen::MatrixXd::Identity(d, d) / spec.theta;
  const Vec g = sub_grad(spec, spec.x_g);
  const Eigen::VectorXd step = H.ldlt().solve(Eigen::Map<const Eigen::VectorXd>(g.data(), d));
  Vec x = spec.x_g;
  for (Eigen::Index i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] -= step(i);
  return x;
}

// Subproblem around a perturbed x* with s = grad p(x_g) and theta = 1/(3 delta).
SubproblemSpec standard_sub(const fixtures::Fixture& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vec xg = f.c.x_star;
  for (auto& v : xg) v += 0.5 * std::normal_distribution<double>()(rng);
  const Vec s = diff(f.global->gradient(xg), f.nodes[0].gradient(xg));
  return SubproblemSpec{s, xg, 1.0 / (3.0 * f.c.delta), &f.nodes[0], f.c.L1};
}

Outcome contraction(bool second) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = fixtures::standard();
  Federation fed(f.nodes, NoiseModel::none(), kFull, 1);
  auto p = second ? tune_set2(f.c.mu, f.c.delta, f.nodes.size()) : tune_set1(f.c.mu, f.c.delta);
  p.N = 200;
  const auto tr = run_aseg(fed, reference(f), p, kExact);
  const double rate = 1 - std::sqrt(f.c.mu * p.theta) / (second ? 18.0 : 3.0);
  int bad = 0;
  double worst = -INFINITY;
  for (std::size_t k = 0; k + 1 < tr.rows.size(); ++k) {
    const double excess = tr.rows[k + 1].phi - rate * tr.rows[k].phi - 1e-9 * tr.rows[0].phi;
    worst = std::max(worst, excess / tr.rows[0].phi);
    bad += excess > 0;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && tr.rows.size() == 201 && secs < 10.0,
          "violations=" + std::to_string(bad) + " worst_rel_excess=" + fmt(worst) +
              " phi_200/phi_0=" + fmt(tr.rows.back().phi / tr.rows[0].phi) + " time=" + fmt(secs) + "s"};
}

Outcome noise_floor() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = fixtures::standard();
  const double noise_sd = 0.1;
  const double sigma_noise_sq = NoiseModel::gaussian(noise_sd).variance_bound(f.nodes[0].dim());
  const double sigma_sq = 2 * (f.c.sigma_sim_sq + sigma_noise_sq);
  auto p = tune_set1(f.c.mu, f.c.delta);
  p.N = 600;
  const int seeds = 20;
  std::vector<double> means;
  std::string detail;
  bool ok = true;
  for (std::size_t B : {1, 4, 16}) {
    double acc = 0;
    int count = 0;
    for (int s = 0; s < seeds; ++s) {
      Federation fed(f.nodes, NoiseModel::gaussian(noise_sd), SamplingPlan{.B = B}, 100 + s);
      const auto tr = run_aseg(fed, reference(f), p, kExact);
      for (std::size_t k = 300; k <= 600; ++k, ++count) acc += tr.rows[k].phi;
    }
    const double mean = acc / count;
    const double bound = 3 * 12 * std::sqrt(p.theta) * sigma_sq / (double(B) * std::sqrt(f.c.mu));
    ok &= mean <= bound;
    means.push_back(mean);
    detail += "B=" + std::to_string(B) + ": " + fmt(mean) + "<=" + fmt(bound) + " ";
  }
  const bool monotone = means[0] > means[1] && means[1] > means[2];
  const double secs = seconds_since(t0);
  return {ok && monotone && secs < 120.0,
          detail + (monotone ? "monotone" : "NOT monotone") + " time=" + fmt(secs) + "s"};
}

Outcome batch_threshold() {
  const long long a = b_threshold(0.105, 1.45);
  const long long b = b_threshold(0.06, 0.07);
  return {a >= 3690 && a <= 3700 && b == 91,
          "b(0.105,1.45)=" + std::to_string(a) + " b(0.06,0.07)=" + std::to_string(b) +
              " = ceil(72 (delta/mu)^1.5), not 57"};
}

Outcome ledger() {
  const auto f = fixtures::standard(3, 0.1, 13, 6, 20);
  const auto p0 = tune_set1(f.c.mu, f.c.delta);
  const SolverConfig svrg{.kind = SolverKind::SVRG, .iters = 2};
  int runs = 0, bad = 0;
  for (std::size_t B : {1, 2, 5, 13}) {
    for (std::size_t N : {1, 7, 30}) {
      for (bool repl : {true, false}) {
        if (!repl && B > 12) continue;
        auto p = p0;
        p.N = N;
        Federation fed(f.nodes, NoiseModel::gaussian(0.1), SamplingPlan{.B = B, .replacement = repl},
                       B * 100 + N);
        const auto tr = run_aseg(fed, reference(f), p, svrg);
        const auto M = static_cast<double>(f.nodes.size());
        bad += tr.ledger.contacts != static_cast<std::int64_t>(2 * B * N);
        bad += tr.ledger.normalized_rounds != double(N * B) / M;
        bad += tr.rows.back().contacts != static_cast<std::int64_t>(2 * B * N);
        ++runs;
      }
    }
  }
  return {bad == 0, "runs=" + std::to_string(runs) + " mismatches=" + std::to_string(bad)};
}

Outcome lemma3() {
  const auto f = fixtures::standard(1, 0.2, 20, 30, 200);
  const double noise_sd = 0.3;
  std::string detail;
  bool ok = true;
  for (std::size_t B : {1, 4}) {
    Federation fed(f.nodes, NoiseModel::gaussian(noise_sd), SamplingPlan{.B = B}, 5);
    std::mt19937_64 g(7);
    Vec xg = f.c.x_star;
    for (auto& v : xg) v += 0.5 * std::normal_distribution<double>()(g);
    const Vec gp = diff(fed.global().gradient(xg), fed.server().gradient(xg));
    const int draws = 10000;
    double m1 = 0, m2 = 0;
    for (int k = 0; k < draws; ++k) {
      const double e = norm_sq(diff(fed.aggregate_s(k, fed.sample_clients(1, k), xg), gp));
      m1 += e;
      m2 += e * e;
    }
    m1 /= draws;
    const double se = std::sqrt((m2 / draws - m1 * m1) / draws);
    const double bound = 2 * (f.c.sigma_sim_sq + fed.noise().variance_bound(30)) / double(B) +
                         4 * f.delta_all * f.delta_all / double(B) * fixtures::dist_sq(xg, f.c.x_star);
    ok &= m1 <= bound + 3 * se;
    detail += "B=" + std::to_string(B) + ": " + fmt(m1) + "<=" + fmt(bound) + "+3*" + fmt(se) + " ";
  }
  return {ok, detail};
}

Outcome prop1() {
  std::size_t violations = 0, checks = 0;
  double slack = -INFINITY;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (double hetero : {0.05, 0.5}) {
      const auto f = fixtures::standard(seed, hetero);
      std::mt19937_64 g(seed * 17);
      std::vector<Vec> pts;
      for (int i = 0; i < 200; ++i) {
        Vec x = fixtures::gaussian(f.c.x_star.size(), g, 2.0);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += f.c.x_star[k];
        pts.push_back(std::move(x));
      }
      const auto rep = check_prop1(f.nodes, *f.global, f.delta_all, f.c.x_star, pts);
      violations += rep.violations.size();
      checks += rep.checks;
      slack = std::max(slack, rep.max_slack);
    }
  }
  return {violations == 0, "checks=" + std::to_string(checks) + " violations=" +
                               std::to_string(violations) + " max_slack=" + fmt(slack)};
}

Outcome solvers() {
  std::string detail;

  // SGD on a server whose rows only touch the first 3 of 7 coordinates; the
  // error stays where the Hessian of A is exactly I/theta.
  double sgd_dev = 0;
  {
    std::mt19937_64 g(3);
    std::normal_distribution<double> nd;
    auto ds = std::make_shared<Dataset>();
    ds->dim = 7;
    const std::vector<std::int32_t> idx{0, 1, 2};
    std::vector<double> val(3);
    for (int i = 0; i < 50; ++i) {
      for (auto& v : val) v = nd(g);
      ds->add_row(nd(g), idx, val);
    }
    Objective server(LossModel{LossKind::Quadratic, 0.0}, ds);
    Vec xg = fixtures::gaussian(7, g);
    Vec s = server.gradient(xg);
    for (auto& v : s) v = -v;
    for (std::size_t i = 3; i < 7; ++i) s[i] += nd(g);
    const SubproblemSpec ns{s, xg, 0.4, &server, estimate_smoothness(server).value};
    const Vec xhat = dense_argmin(ns);
    const double gamma = 1.0 / (2 * ns.L_A());
    double prev = std::sqrt(fixtures::dist_sq(xg, xhat));
    for (std::size_t T = 1; T <= 20; ++T) {
      SolverConfig cfg{.kind = SolverKind::SGD, .gamma = gamma, .iters = T, .minibatch = 0};
      Rng rng(1);
      const double cur = std::sqrt(fixtures::dist_sq(sgd_solve(ns, cfg, rng).x, xhat));
      sgd_dev = std::max(sgd_dev, std::abs(cur / prev - (1.0 - gamma / ns.theta)));
      prev = cur;
    }
  }
  detail += "sgd_factor_dev=" + fmt(sgd_dev);

  // SVRG: mean gap after e epochs against (factor + 0.1)^e.
  const auto f = fixtures::standard();
  const auto spec = standard_sub(f, 1);
  const Vec xhat = dense_argmin(spec);
  const double a_star = sub_value(spec, xhat);
  const double gap0 = sub_value(spec, spec.x_g) - a_star;
  SolverConfig svrg{.kind = SolverKind::SVRG};
  const double factor = svrg_epoch_factor(spec.mu_A(), spec.L_A(), resolve_gamma(spec, svrg),
                                          resolve_epoch(spec, svrg));
  double worst_ratio = 0;
  for (std::size_t e = 1; e <= 8; ++e) {
    double mean_gap = 0;
    const int seeds = 20;
    for (int k = 0; k < seeds; ++k) {
      Rng rng(50 + k);
      svrg.iters = e;
      mean_gap += (sub_value(spec, svrg_solve(spec, svrg, rng).x) - a_star) / seeds;
    }
    worst_ratio = std::max(worst_ratio, std::pow(std::max(mean_gap, 0.0) / gap0, 1.0 / double(e)));
  }
  detail += " svrg_rate=" + fmt(worst_ratio) + "<=" + fmt(factor + 0.1);

  // Surrogate stop against the dense minimizer.
  std::mt19937_64 g(31);
  int false_fires = 0, fires = 0;
  for (int inst = 0; inst < 50; ++inst) {
    SubproblemSpec sp = spec;
    sp.x_g = fixtures::gaussian(spec.dim(), g, 2.0);
    sp.s = fixtures::gaussian(spec.dim(), g, 5.0);
    sp.theta = std::uniform_real_distribution<double>(0.1, 1.0)(g) / (3 * f.c.delta);
    const double rhs = 9 * f.c.delta * f.c.delta / 11 * fixtures::dist_sq(sp.x_g, dense_argmin(sp));
    Rng rng(inst);
    const SolverConfig stop{.kind = SolverKind::SVRG, .iters = 100,
                            .stop = StopPolicy::surrogate(f.c.delta)};
    const auto res = svrg_solve(sp, stop, rng);
    fires += res.stopped_early;
    false_fires += res.stopped_early && res.grad_norm_sq > rhs;
  }
  detail += " surrogate_fired=" + std::to_string(fires) + "/50 false=" + std::to_string(false_fires);
  return {sgd_dev <= 1e-9 && worst_ratio <= factor + 0.1 && false_fires == 0 && fires == 50, detail};
}

Outcome convex_rate() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec s;
  s.d = 30;
  s.M = 10;
  s.points_per_node = 60;
  s.hetero = 0.1;
  s.condition = 1e3;
  s.seed = 4;
  const auto raw = gen_synthetic_quadratic(s).nodes;
  std::vector<Objective> nodes;
  for (const auto& n : raw) nodes.push_back(n.with_lambda(0.0));
  const auto global = Objective::average(nodes);
  const auto c = estimate_constants(nodes, global);
  Federation fed(nodes, NoiseModel::none(), kFull, 1);
  const std::size_t N = 256;
  ConvexSchedule sched{theta_convex(1, c.delta, N, 1.0, 0.0).theta, EtaRule::Proof, N};
  std::mt19937_64 g(9);
  const Vec x0 = fixtures::gaussian(s.d, g, 3.0);
  const auto tr = run_aseg_convex(fed, RunReference{c.L1, c.x_star, c.r_star}, sched, kExact,
                                  RunOptions{.x0 = x0});
  std::vector<double> lx, ly;
  std::string pts;
  for (std::size_t n = 16; n <= N; n *= 2) {
    lx.push_back(std::log(double(n)));
    ly.push_back(std::log(tr.rows[n].gap));
    pts += fmt(tr.rows[n].gap) + " ";
  }
  const double slope = ls_slope(lx, ly);
  const double secs = seconds_since(t0);
  return {slope <= -1.8 && secs < 30.0, "slope=" + fmt(slope) + " mu/L=" + fmt(c.mu / c.L) +
                                            " gaps=[" + pts + "] time=" + fmt(secs) + "s"};
}

Outcome loopless() {
  const auto f = fixtures::standard();
  const auto spec = standard_sub(f, 2);
  const SolverConfig cfg{.kind = SolverKind::SVRG};
  const auto rep = loopless_compare(spec, cfg, TLaw{TLaw::Kind::Geometric, 4.0}, 50, 11);
  return {rep.random_not_better() && !rep.low_confidence,
          "fixed=" + fmt(rep.mean_fixed) + " random=" + fmt(rep.mean_random) + " z=" + fmt(rep.z)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ASEG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "aseg_acceptance_repro";
  fs::remove_all(root);
  const std::string cfg =
      "run -s synth.d=12 -s synth.points_per_node=40 -s fed.M=10 -s fed.B=3 -s iterations=40"
      " -s noise.kind=gaussian -s noise.scale=0.2 -s solver.kind=svrg -s solver.iters=3"
      " -s seeds=1,2,3,4,5,6,7,8";
  int rc = 0;
  rc |= run_cli(cfg + " -j 1 -o " + (root / "a").string());
  rc |= run_cli(cfg + " -j 1 -o " + (root / "b").string());
  rc |= run_cli(cfg + " -j 8 -o " + (root / "c").string());
  if (rc != 0) return {false, "cli exit status " + std::to_string(rc)};
  int compared = 0, differ = 0;
  for (int s = 1; s <= 8; ++s) {
    const std::string name = "trace_seed" + std::to_string(s) + ".csv";
    const auto a = slurp(root / "a" / name);
    differ += a.empty() || a != slurp(root / "b" / name) || a != slurp(root / "c" / name);
    ++compared;
  }
  differ += slurp(root / "a" / "aggregate.csv") != slurp(root / "c" / "aggregate.csv");
  const bool seeds_distinct = slurp(root / "a" / "trace_seed1.csv") != slurp(root / "a" / "trace_seed2.csv");
  fs::remove_all(root);
  return {differ == 0 && seeds_distinct,
          "traces_compared=" + std::to_string(compared) + " mismatches=" + std::to_string(differ)};
}

Outcome oracles() {
  const auto ds = std::make_shared<const Dataset>(
      load_dataset(fixtures::data_path("mushrooms_sample.libsvm"), LossKind::Logistic));
  double worst_g = 0, worst_h = 0;
  std::mt19937_64 rng(12);
  for (auto kind : {LossKind::Quadratic, LossKind::Logistic}) {
    const Objective obj(LossModel{kind, 0.01}, ds);
    for (int rep = 0; rep < 5; ++rep) {
      const Vec x = fixtures::gaussian(obj.dim(), rng, 0.3);
      Vec fd(x.size()), xp = x;
      for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + 1e-6;
        const double fp = obj.value(xp);
        xp[i] = x[i] - 1e-6;
        const double fm = obj.value(xp);
        xp[i] = x[i];
        fd[i] = (fp - fm) / 2e-6;
      }
      worst_g = std::max(worst_g, rel_err(obj.gradient(x), fd));

      const Vec v = fixtures::gaussian(obj.dim(), rng);
      Vec a = x, b = x;
      for (std::size_t i = 0; i < x.size(); ++i) a[i] += 1e-5 * v[i], b[i] -= 1e-5 * v[i];
      const Vec ga = obj.gradient(a), gb = obj.gradient(b);
      Vec hv(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) hv[i] = (ga[i] - gb[i]) / 2e-5;
      worst_h = std::max(worst_h, rel_err(obj.hessian_vec(x, v), hv));
    }
  }
  return {worst_g <= 1e-5 && worst_h <= 1e-4 && ds->rows() <= 1000,
          "rows=" + std::to_string(ds->rows()) + " grad_rel=" + fmt(worst_g) + " hv_rel=" + fmt(worst_h)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"deterministic contraction, first tuning", [] { return contraction(false); }},
      {"deterministic contraction, second tuning", [] { return contraction(true); }},
      {"noise floor across batch sizes", noise_floor},
      {"batch-size threshold arithmetic", batch_threshold},
      {"communication ledger", ledger},
      {"sampling variance bound", lemma3},
      {"gradient similarity bound", prop1},
      {"subproblem solvers", solvers},
      {"convex variant rate", convex_rate},
      {"random versus fixed loop length", loopless},
      {"reproducibility across runs and job counts", reproducibility},
      {"oracle finite differences on libsvm data", oracles},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += !out.pass;
    std::cout << "C" << i + 1 << " " << (out.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << "  [" << out.detail << "]" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}

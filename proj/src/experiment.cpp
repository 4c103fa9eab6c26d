#include "aseg/experiment.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "aseg/kernels.hpp"
#include "aseg/similarity.hpp"

namespace fs = std::filesystem;

namespace aseg {

namespace {

std::vector<Objective> with_lambda(const std::vector<Objective>& nodes, double lambda) {
  std::vector<Objective> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.with_lambda(lambda));
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first failure (by
// index) is rethrown after every job has finished.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= n) return;
            i = next++;
          }
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_meta(const std::string& path, const RunConfig& cfg, const ProblemSetup& p,
                const ResolvedTuning& t) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  const auto& c = p.constants;
  f << "config_hash=" << cfg.hash() << '\n';
  f << "source=" << p.source << '\n';
  f << "rows=" << p.rows << '\n';
  f << "dim=" << p.dim() << '\n';
  f << "kernels=" << kernels::active().name << '\n';
  f << "lambda=" << format_double(p.lambda) << '\n';
  f << "mu=" << format_double(c.mu) << '\n';
  f << "L=" << format_double(c.L) << '\n';
  f << "L1=" << format_double(c.L1) << '\n';
  f << "delta=" << format_double(c.delta) << '\n';
  f << "delta_raw=" << format_double(p.delta_raw) << '\n';
  f << "sigma_sim_sq=" << format_double(c.sigma_sim_sq) << '\n';
  f << "sigma_sq=" << format_double(t.sigma_sq) << '\n';
  f << "r_star=" << format_double(c.r_star) << '\n';
  f << "reference_grad_norm=" << format_double(c.reference_grad_norm) << '\n';
  if (t.convex) {
    f << "theta=" << format_double(t.schedule.theta) << '\n';
    f << "eta_rule=" << (t.schedule.eta_rule == EtaRule::Proof ? "proof" : "statement") << '\n';
  } else {
    f << "tau=" << format_double(t.params.tau) << '\n';
    f << "eta=" << format_double(t.params.eta) << '\n';
    f << "theta=" << format_double(t.params.theta) << '\n';
    f << "alpha=" << format_double(t.params.alpha) << '\n';
  }
  std::istringstream canon(cfg.canonical());
  std::string line;
  while (std::getline(canon, line)) f << "config." << line << '\n';
}

RunReport run_seeds(const RunConfig& cfg, const ProblemSetup& p, std::size_t jobs) {
  fs::create_directories(cfg.output);
  RunReport rep;
  rep.hash = cfg.hash();
  rep.seeds = cfg.seeds;
  rep.traces.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
    rep.traces[i] = run_single(cfg, p, cfg.seeds[i]);
    write_trace_csv((fs::path(cfg.output) / ("trace_seed" + std::to_string(cfg.seeds[i]) + ".csv"))
                        .string(),
                    rep.traces[i].rows);
  });
  std::vector<std::vector<TraceRow>> rows;
  for (const auto& t : rep.traces) rows.push_back(t.rows);
  rep.aggregate = aggregate_traces(rows);
  write_aggregate_csv((fs::path(cfg.output) / "aggregate.csv").string(), rep.aggregate);
  write_meta((fs::path(cfg.output) / "meta.txt").string(), cfg, p, resolve_tuning(cfg, p));
  return rep;
}

}  // namespace

ProblemSetup build_problem(const RunConfig& cfg) {
  ProblemSetup p;
  std::vector<Objective> raw;
  if (cfg.synth) {
    SynthSpec spec = *cfg.synth;
    spec.M = cfg.M;
    spec.lambda = 0.0;
    raw = gen_synthetic_quadratic(spec).nodes;
    p.source = "synthetic";
  } else {
    const Dataset ds = load_dataset(cfg.data_path, cfg.loss);
    Partition part = build_partition(ds, LossModel{cfg.loss, 0.0}, cfg.M, cfg.N,
                                     cfg.partition_seed);
    raw = std::move(part.nodes);
    p.source = cfg.data_path;
  }
  for (const auto& n : raw) p.rows += n.num_rows();

  const Objective raw_global = Objective::average(raw);
  p.L_unregularized = estimate_smoothness(raw_global).value;
  p.lambda = cfg.lambda ? *cfg.lambda : p.L_unregularized / 100.0;
  p.nodes = with_lambda(raw, p.lambda);
  const Objective global = Objective::average(p.nodes);

  ConstantsOptions opts;
  opts.delta_points = cfg.delta_points;
  opts.delta_radius = cfg.delta_radius;
  opts.safety_factor = cfg.delta_safety;
  opts.seed = cfg.partition_seed;
  p.constants = estimate_constants(p.nodes, global, opts);
  p.delta_raw = p.constants.delta / cfg.delta_safety;
  if (cfg.mu) {
    if (!(*cfg.mu > 0)) throw ConfigError("mu override must be positive");
    p.constants.mu = *cfg.mu;
  }
  if (cfg.delta) {
    if (!(*cfg.delta > 0)) throw ConfigError("delta override must be positive");
    p.constants.delta = *cfg.delta;
    p.delta_raw = std::numeric_limits<double>::quiet_NaN();
  }
  return p;
}

ResolvedTuning resolve_tuning(const RunConfig& cfg, const ProblemSetup& p) {
  const auto& c = p.constants;
  ResolvedTuning t;
  t.sigma_sq = 2.0 * (c.sigma_sim_sq + cfg.noise.variance_bound(p.dim()));
  const std::size_t B_eff = cfg.plan.mode == Participation::Full ? cfg.M : cfg.plan.B;
  switch (cfg.tuning) {
    case Tuning::Set1:
      t.params = tune_set1(c.mu, c.delta, cfg.theta);
      break;
    case Tuning::Set2:
      t.params = tune_set2(c.mu, c.delta, B_eff, cfg.theta);
      break;
    case Tuning::Manual:
      t.params.tau = cfg.tau;
      t.params.eta = cfg.eta;
      t.params.theta = *cfg.theta;
      t.params.alpha = cfg.alpha;
      break;
    case Tuning::Convex: {
      t.convex = true;
      t.schedule.eta_rule = cfg.eta_rule;
      t.schedule.N = cfg.iterations;
      if (cfg.theta) {
        t.schedule.theta = *cfg.theta;
      } else {
        const double dist0 = std::sqrt(kernels::nrm2sq(c.x_star));  // x0 = 0
        t.schedule.theta = theta_convex(B_eff, c.delta, cfg.iterations, dist0, t.sigma_sq).theta;
      }
      break;
    }
  }
  t.params.B = B_eff;
  t.params.N = cfg.iterations;
  if (!t.convex) t.params.validate();
  return t;
}

RunTrace run_single(const RunConfig& cfg, const ProblemSetup& p, std::uint64_t seed) {
  Federation fed(p.nodes, cfg.noise, cfg.plan, seed);
  const ResolvedTuning t = resolve_tuning(cfg, p);
  SolverConfig solver = cfg.solver;
  solver.stop.delta = p.constants.delta;
  RunReference ref;
  ref.L1 = p.constants.L1;
  ref.x_star = p.constants.x_star;
  ref.r_star = p.constants.r_star;
  RunOptions opt;
  opt.blind = cfg.blind;
  opt.timing = cfg.wall_time;
  return t.convex ? run_aseg_convex(fed, ref, t.schedule, solver, opt)
                  : run_aseg(fed, ref, t.params, solver, opt);
}

std::string cmd_estimate(const RunConfig& cfg) {
  const ProblemSetup p = build_problem(cfg);
  const auto& c = p.constants;
  std::ostringstream os;
  os << "source=" << p.source << '\n';
  os << "loss=" << to_string(cfg.loss) << '\n';
  os << "nodes=" << p.nodes.size() << '\n';
  os << "rows=" << p.rows << '\n';
  os << "dim=" << p.dim() << '\n';
  os << "lambda=" << format_double(p.lambda) << '\n';
  os << "mu=" << format_double(c.mu) << '\n';
  os << "L=" << format_double(c.L) << '\n';
  os << "L1=" << format_double(c.L1) << '\n';
  os << "delta=" << format_double(c.delta) << '\n';
  os << "delta_raw=" << format_double(p.delta_raw) << '\n';
  os << "delta_safety=" << format_double(cfg.delta_safety) << '\n';
  os << "sigma_sim_sq=" << format_double(c.sigma_sim_sq) << '\n';
  os << "r_star=" << format_double(c.r_star) << '\n';
  os << "reference_grad_norm=" << format_double(c.reference_grad_norm) << '\n';
  if (c.mu > 0 && c.delta > 0)
    os << "b_threshold=" << b_threshold(std::min(c.mu, c.delta), c.delta) << '\n';
  os << "config_hash=" << cfg.hash() << '\n';
  if (!cfg.output.empty()) {
    fs::create_directories(cfg.output);
    std::ofstream f(fs::path(cfg.output) / "estimate.txt");
    f << os.str();
  }
  return os.str();
}

RunReport cmd_run(const RunConfig& cfg, std::size_t jobs) {
  const ProblemSetup p = build_problem(cfg);
  return run_seeds(cfg, p, jobs);
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "B") return SweepAxis::B;
  if (s == "noise") return SweepAxis::Noise;
  if (s == "epoch") return SweepAxis::Epoch;
  if (s == "theta") return SweepAxis::Theta;
  throw ConfigError("unknown sweep axis '" + s + "' (expected B, noise, epoch or theta)");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::B:
      return "B";
    case SweepAxis::Noise:
      return "noise";
    case SweepAxis::Epoch:
      return "epoch";
    case SweepAxis::Theta:
      return "theta";
  }
  return "B";
}

RunConfig apply_axis(const RunConfig& cfg, SweepAxis axis, const std::string& value) {
  static const char* keys[] = {"fed.B", "noise.scale", "solver.epoch", "tuning.theta"};
  const std::string key = keys[static_cast<int>(axis)];
  // Apply the value through the config parser on top of the current settings,
  // so the sweep accepts exactly what a config file would.
  KeyValues kv;
  std::istringstream canon(cfg.canonical());
  std::string line;
  while (std::getline(canon, line)) kv.push_back(split_assignment(line));
  kv.emplace_back(key, value);
  RunConfig out = build_config(kv);
  if (axis == SweepAxis::Noise && out.noise.kind == NoiseKind::None && out.noise.scale > 0)
    out.noise.kind = NoiseKind::Gaussian;
  out.output = (fs::path(cfg.output) / (to_string(axis) + "_" + value)).string();
  return out;
}

std::vector<RunReport> cmd_sweep(const RunConfig& cfg, SweepAxis axis,
                                 const std::vector<std::string>& values, std::size_t jobs) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const ProblemSetup p = build_problem(cfg);
  std::vector<RunConfig> cells;
  for (const auto& v : values) cells.push_back(apply_axis(cfg, axis, v));
  for (const auto& c : cells) {
    resolve_tuning(c, p);  // fail fast on an invalid cell
    fs::create_directories(c.output);
  }

  // Flatten cells x seeds so --jobs spreads over both.
  struct Job {
    std::size_t cell, seed_idx;
  };
  std::vector<Job> jobs_list;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t s = 0; s < cells[c].seeds.size(); ++s) jobs_list.push_back({c, s});
  std::vector<RunReport> reps(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    reps[c].hash = cells[c].hash();
    reps[c].seeds = cells[c].seeds;
    reps[c].traces.resize(cells[c].seeds.size());
  }
  parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
    const auto& j = jobs_list[i];
    const RunConfig& c = cells[j.cell];
    const std::uint64_t seed = c.seeds[j.seed_idx];
    reps[j.cell].traces[j.seed_idx] = run_single(c, p, seed);
    write_trace_csv((fs::path(c.output) / ("trace_seed" + std::to_string(seed) + ".csv")).string(),
                    reps[j.cell].traces[j.seed_idx].rows);
  });

  std::ofstream summary(fs::path(cfg.output) / "sweep.csv");
  summary << "axis,value,seed,final_gap,final_phi,contacts,normalized_rounds\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::vector<TraceRow>> rows;
    for (const auto& t : reps[c].traces) rows.push_back(t.rows);
    reps[c].aggregate = aggregate_traces(rows);
    write_aggregate_csv((fs::path(cells[c].output) / "aggregate.csv").string(), reps[c].aggregate);
    write_meta((fs::path(cells[c].output) / "meta.txt").string(), cells[c], p,
               resolve_tuning(cells[c], p));
    for (std::size_t s = 0; s < reps[c].traces.size(); ++s) {
      const auto& last = reps[c].traces[s].rows.back();
      summary << to_string(axis) << ',' << values[c] << ',' << cells[c].seeds[s] << ','
              << format_double(last.gap) << ',' << format_double(last.phi) << ','
              << last.contacts << ',' << format_double(last.normalized_rounds) << '\n';
    }
  }
  return reps;
}

CompareReport cmd_compare(const RunConfig& cfg, std::size_t jobs) {
  const ProblemSetup p = build_problem(cfg);
  RunConfig a = cfg;
  a.output = (fs::path(cfg.output) / "aseg").string();
  RunConfig g = cfg;
  g.output = (fs::path(cfg.output) / "aeg").string();
  g.plan.mode = Participation::Full;
  g.noise = NoiseModel::none();
  g.solver.kind = SolverKind::Exact;
  g.solver.stop = StopPolicy::fixed();

  CompareReport rep;
  rep.aseg = run_seeds(a, p, jobs);
  rep.aeg = run_seeds(g, p, jobs);

  std::ofstream f(fs::path(cfg.output) / "compare.csv");
  f << "arm,seed,k,contacts,gap,phi\n";
  auto dump = [&](const char* arm, const RunReport& r) {
    for (std::size_t s = 0; s < r.traces.size(); ++s)
      for (const auto& row : r.traces[s].rows)
        f << arm << ',' << r.seeds[s] << ',' << row.k << ',' << row.contacts << ','
          << format_double(row.gap) << ',' << format_double(row.phi) << '\n';
  };
  dump("aseg", rep.aseg);
  dump("aeg", rep.aeg);
  return rep;
}

void cmd_export_libsvm(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  if (!cfg.synth) {
    write_libsvm(f, load_dataset(cfg.data_path, cfg.loss));
    return;
  }
  SynthSpec spec = *cfg.synth;
  spec.M = cfg.M;
  const auto sp = gen_synthetic_quadratic(spec);
  Dataset all;
  all.dim = spec.d;
  for (const auto& n : sp.nodes)
    for (const auto& sh : n.shards())
      for (std::size_t i = 0; i < sh.data->rows(); ++i) {
        const auto r = sh.data->row(i);
        all.add_row(sh.data->labels[i], r.idx, r.val);
      }
  write_libsvm(f, all);
}

}  // namespace aseg

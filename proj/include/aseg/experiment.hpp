#pragma once

// Experiment orchestration behind the command-line tool.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aseg/config.hpp"
#include "aseg/trace.hpp"

namespace aseg {

/// Nodes, constants and provenance for one configuration's data.
struct ProblemSetup {
  std::vector<Objective> nodes;  ///< nodes[0] is the server
  ProblemConstants constants;
  double delta_raw = 0.0;        ///< delta before the safety factor (NaN when overridden)
  double lambda = 0.0;
  double L_unregularized = 0.0;
  std::size_t rows = 0;          ///< rows in use across all nodes
  std::string source;

  std::size_t dim() const { return nodes.front().dim(); }
};

ProblemSetup build_problem(const RunConfig& cfg);

/// Either constant parameters or a convex schedule, resolved from the tuning.
struct ResolvedTuning {
  bool convex = false;
  AsegParams params;
  ConvexSchedule schedule;
  double sigma_sq = 0.0;  ///< 2 (sigma_sim^2 + sigma_noise^2)
};

ResolvedTuning resolve_tuning(const RunConfig& cfg, const ProblemSetup& p);

/// One seed of one configuration.
RunTrace run_single(const RunConfig& cfg, const ProblemSetup& p, std::uint64_t seed);

struct RunReport {
  std::string hash;
  std::vector<std::uint64_t> seeds;
  std::vector<RunTrace> traces;
  std::vector<AggregateRow> aggregate;
};

/// Key/value report of the problem constants; also written to
/// <output>/estimate.txt.
std::string cmd_estimate(const RunConfig& cfg);

/// Runs every seed and writes trace_seed<s>.csv, aggregate.csv and meta.txt
/// under cfg.output.
RunReport cmd_run(const RunConfig& cfg, std::size_t jobs = 1);

enum class SweepAxis { B, Noise, Epoch, Theta };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis a);

/// cfg with one axis value applied.
RunConfig apply_axis(const RunConfig& cfg, SweepAxis axis, const std::string& value);

/// One run report per value under <output>/<axis>_<value>/, plus sweep.csv.
std::vector<RunReport> cmd_sweep(const RunConfig& cfg, SweepAxis axis,
                                 const std::vector<std::string>& values, std::size_t jobs = 1);

struct CompareReport {
  RunReport aseg;
  RunReport aeg;
};

/// ASEG as configured against the full-participation, noise-free,
/// exact-prox special case; writes <output>/aseg, <output>/aeg and compare.csv.
CompareReport cmd_compare(const RunConfig& cfg, std::size_t jobs = 1);

/// Writes the configured data source back out in libsvm format.
void cmd_export_libsvm(const RunConfig& cfg, const std::string& path);

}  // namespace aseg

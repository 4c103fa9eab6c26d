#pragma once

// Flat "key = value" run configuration.
//
// Lines are "key = value"; '#' starts a comment. Later assignments win, so
// command-line overrides are simply appended. Unknown keys are an error.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aseg/aseg.hpp"
#include "aseg/dataio.hpp"
#include "aseg/similarity.hpp"

namespace aseg {

enum class Tuning { Set1, Set2, Convex, Manual };

std::string to_string(Tuning t);
Tuning parse_tuning(const std::string& s);

struct RunConfig {
  // Data: exactly one of data_path / synth.
  std::string data_path;
  std::optional<SynthSpec> synth;

  LossKind loss = LossKind::Quadratic;
  std::optional<double> lambda;  ///< unset: L / 100
  std::optional<double> mu;      ///< unset: estimated
  std::optional<double> delta;   ///< unset: estimated

  std::size_t M = 20;
  std::size_t N = 1;             ///< server batches (file data only)
  std::uint64_t partition_seed = 1;
  SamplingPlan plan;
  NoiseModel noise;

  Tuning tuning = Tuning::Set1;
  std::optional<double> theta;   ///< unset: the preset's default
  double tau = 0.0, eta = 0.0, alpha = 0.0;  ///< manual tuning only
  EtaRule eta_rule = EtaRule::Proof;

  SolverConfig solver;

  std::size_t iterations = 100;
  std::vector<std::uint64_t> seeds{1};
  std::string output = "out";
  bool wall_time = false;
  bool blind = false;

  int delta_points = 100;
  double delta_radius = -1.0;
  double delta_safety = kDeltaSafetyFactor;

  /// Every semantically meaningful field as sorted "key=value" lines
  /// (output location excluded).
  std::string canonical() const;
  /// FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;
};

/// Ordered key/value assignments; parse errors carry the 1-based line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues read_key_values(std::istream& in);
KeyValues read_key_values_file(const std::string& path);
/// "key=value" from the command line.
std::pair<std::string, std::string> split_assignment(const std::string& s);

/// Applies assignments in order on top of the defaults. Throws ConfigError.
RunConfig build_config(const KeyValues& kv);

/// Keys accepted by build_config, with one-line descriptions.
const std::map<std::string, std::string>& config_keys();

}  // namespace aseg

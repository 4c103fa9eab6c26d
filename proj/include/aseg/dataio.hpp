#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "aseg/dense.hpp"
#include "aseg/problem.hpp"

namespace aseg {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ParsedLibsvm {
  Dataset data;
  std::size_t d_inferred = 0;  ///< max 1-based index seen
};

/// Reads "label idx:val idx:val ..." lines. '#' starts a comment; blank lines
/// are skipped. The dataset dimension is max(d_inferred, min_dim).
ParsedLibsvm parse_libsvm(std::istream& in, std::size_t min_dim = 0);
ParsedLibsvm read_libsvm_file(const std::string& path, std::size_t min_dim = 0);

/// Writes the same format back with round-trip precision.
void write_libsvm(std::ostream& out, const Dataset& ds);

/// Reads a file for use with the given loss; classification labels are mapped
/// onto {-1, +1} for the logistic loss.
Dataset load_dataset(const std::string& path, LossKind loss, std::size_t min_dim = 0);

/// The server/client layout built from M + N shuffled batches.
///
/// Node 0 is the server: its objective is the uniform mixture of batches
/// 0..N-1. Nodes 1..M-1 each own one of the next M-1 batches; the last batch
/// is left unused. The global objective averages the M node objectives.
struct Partition {
  std::vector<std::vector<std::size_t>> batches;  ///< row ids per batch
  std::vector<std::size_t> server_batches;
  std::vector<std::size_t> client_batches;        ///< batch id for nodes 1..M-1
  std::vector<std::size_t> dropped_batches;
  std::uint64_t shuffle_seed = 0;
  std::vector<Objective> nodes;                   ///< nodes[0] is the server
  std::shared_ptr<const Objective> global;

  const Objective& server() const { return nodes.front(); }
};

Partition build_partition(const Dataset& ds, LossModel model, std::size_t M, std::size_t N,
                          std::uint64_t seed);

/// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct SynthSpec {
  std::size_t d = 10;
  std::size_t M = 4;
  std::size_t points_per_node = 200;
  double hetero = 0.1;        ///< spread of per-node covariances and targets
  std::uint64_t seed = 1;
  double lambda = 0.0;
  double condition = 10.0;    ///< eigenvalue spread of the shared covariance
  double label_noise = 0.1;
  bool exact_gram = false;    ///< d deterministic rows reproducing each covariance exactly
};

struct SyntheticProblem {
  std::vector<Objective> nodes;  ///< nodes[0] is the server
  std::shared_ptr<const Objective> global;
  double delta_exact = 0.0;      ///< ||H_server - H_global||, no safety factor
  double delta_all_nodes = 0.0;  ///< max_m ||H_m - H_global||
  Vec x_target;

  const Objective& server() const { return nodes.front(); }
};

SyntheticProblem gen_synthetic_quadratic(const SynthSpec& spec);

/// Quadratic objective whose Hessian is exactly 2*gram + 2*lambda*I, with
/// labels chosen so that the unregularized minimizer is x_target.
Objective quadratic_from_gram(const Eigen::MatrixXd& gram, ConstVecView x_target,
                              double lambda = 0.0);

}  // namespace aseg

#pragma once

// Regularized finite-sum objectives and their oracles.
//
// An Objective is a weighted mixture of data shards sharing one loss model:
//
//   r(x) = sum_s w_s * (1/n_s) sum_j loss(<a_j, x>, b_j) + lambda * ||x||^2
//
// with sum_s w_s = 1. A single dataset is the one-shard case; the server's
// N-batch average and the global M-node average are mixtures.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aseg/rng.hpp"
#include "aseg/types.hpp"

namespace aseg {

/// Sparse rows (CSR, 0-based columns) plus one label per row.
struct Dataset {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::int32_t> col_idx;
  std::vector<double> values;
  std::vector<double> labels;

  struct Row {
    std::span<const std::int32_t> idx;
    std::span<const double> val;
  };

  std::size_t rows() const noexcept { return labels.size(); }
  Row row(std::size_t i) const {
    const auto b = row_ptr[i], e = row_ptr[i + 1];
    return {std::span(col_idx).subspan(b, e - b), std::span(values).subspan(b, e - b)};
  }

  /// Appends a row; indices must be 0-based and strictly increasing.
  void add_row(double label, std::span<const std::int32_t> idx, std::span<const double> val);
  /// Copies the listed rows (in that order) into a new dataset of the same dim.
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  /// Maps a two-valued label set onto {-1, +1} (smaller value -> -1).
  void normalize_binary_labels();
};

enum class LossKind { Quadratic, Logistic };

struct LossModel {
  LossKind kind = LossKind::Quadratic;
  double lambda = 0.0;
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

struct Shard {
  std::shared_ptr<const Dataset> data;
  double weight = 1.0;
};

class Objective {
 public:
  Objective(LossModel model, std::shared_ptr<const Dataset> data);
  Objective(LossModel model, std::vector<Shard> shards);

  /// Uniform average of objectives that share a loss model.
  static Objective average(std::span<const Objective> parts);

  std::size_t dim() const noexcept { return dim_; }
  const LossModel& model() const noexcept { return model_; }
  std::span<const Shard> shards() const noexcept { return shards_; }
  std::size_t num_rows() const noexcept { return total_rows_; }

  Objective with_lambda(double lambda) const;

  double value(ConstVecView x) const;
  /// value(x) - value(y), evaluated without cancellation when x is close to y.
  double value_difference(ConstVecView x, ConstVecView y) const;
  Vec gradient(ConstVecView x) const;
  void gradient(ConstVecView x, VecView out) const;
  Vec hessian_vec(ConstVecView x, ConstVecView v) const;
  void hessian_vec(ConstVecView x, ConstVecView v, VecView out) const;

  /// One data row; sampled with probability w_s / n_s so that its gradient
  /// (plus the regularizer) is an unbiased estimate of the full gradient.
  struct Component {
    std::uint32_t shard;
    std::uint32_t row;
  };
  Component sample_component(Rng& rng) const;
  /// out += scale * (grad loss_c(x) + 2 lambda x)
  void add_component_grad(Component c, ConstVecView x, double scale, VecView out) const;

 private:
  void init();

  LossModel model_;
  std::vector<Shard> shards_;
  std::vector<double> cumulative_weight_;
  std::size_t dim_ = 0;
  std::size_t total_rows_ = 0;
};

struct ProblemConstants {
  double mu = 0.0;
  double L = 0.0;
  double L1 = 0.0;
  double delta = 0.0;
  double sigma_sim_sq = 0.0;
  Vec x_star;
  double r_star = 0.0;
  double reference_grad_norm = 0.0;
};

/// Result of a matrix-free spectral estimate.
struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest Hessian eigenvalue at x = 0 by a Krylov iteration. Exact for
/// quadratics; for logistic it is the sigma' <= 1/4 upper bound, which is
/// attained at the origin.
SpectralEstimate estimate_smoothness(const Objective& obj, int iters = 10000, double tol = 1e-12);

/// 2*lambda + 2*lambda_min(Gram) for quadratics (dense eigensolve), 2*lambda
/// for logistic.
double estimate_strong_convexity(const Objective& obj);

class ReferenceSolveError : public std::runtime_error {
 public:
  ReferenceSolveError(const std::string& what, Vec best, double best_grad_norm)
      : std::runtime_error(what), best_(std::move(best)), grad_norm_(best_grad_norm) {}
  const Vec& best_iterate() const noexcept { return best_; }
  double best_grad_norm() const noexcept { return grad_norm_; }

 private:
  Vec best_;
  double grad_norm_;
};

struct ReferenceSolution {
  Vec x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Accelerated full-gradient descent with adaptive restart until
/// ||grad r(x)|| <= tol.
ReferenceSolution solve_reference(const Objective& obj, double tol = 1e-12,
                                  int max_iter = 500000);

}  // namespace aseg

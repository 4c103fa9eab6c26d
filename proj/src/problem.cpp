#include "aseg/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "aseg/dense.hpp"
#include "aseg/kernels.hpp"
#include "aseg/spectral.hpp"

namespace aseg {

// ---------------------------------------------------------------------------
// Dataset

void Dataset::add_row(double label, std::span<const std::int32_t> idx,
                      std::span<const double> val) {
  if (idx.size() != val.size()) throw std::invalid_argument("add_row: idx/val size mismatch");
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || static_cast<std::size_t>(idx[k]) >= dim)
      throw std::invalid_argument("add_row: feature index out of range");
    if (k > 0 && idx[k] <= idx[k - 1])
      throw std::invalid_argument("add_row: indices not strictly increasing");
  }
  col_idx.insert(col_idx.end(), idx.begin(), idx.end());
  values.insert(values.end(), val.begin(), val.end());
  row_ptr.push_back(col_idx.size());
  labels.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> rows_to_copy) const {
  Dataset out;
  out.dim = dim;
  for (std::size_t r : rows_to_copy) {
    const auto rw = row(r);
    out.col_idx.insert(out.col_idx.end(), rw.idx.begin(), rw.idx.end());
    out.values.insert(out.values.end(), rw.val.begin(), rw.val.end());
    out.row_ptr.push_back(out.col_idx.size());
    out.labels.push_back(labels[r]);
  }
  return out;
}

void Dataset::validate() const {
  if (rows() == 0) throw std::invalid_argument("dataset has no rows");
  if (row_ptr.size() != rows() + 1 || row_ptr.back() != col_idx.size() ||
      col_idx.size() != values.size())
    throw std::invalid_argument("dataset: inconsistent CSR arrays");
  for (std::size_t i = 0; i < rows(); ++i) {
    const auto rw = row(i);
    for (std::size_t k = 0; k < rw.idx.size(); ++k) {
      if (rw.idx[k] < 0 || static_cast<std::size_t>(rw.idx[k]) >= dim)
        throw std::invalid_argument("dataset: feature index out of range in row " +
                                    std::to_string(i));
      if (k > 0 && rw.idx[k] <= rw.idx[k - 1])
        throw std::invalid_argument("dataset: indices not increasing in row " +
                                    std::to_string(i));
    }
  }
}

void Dataset::normalize_binary_labels() {
  std::set<double> distinct(labels.begin(), labels.end());
  if (distinct.size() > 2)
    throw std::invalid_argument("classification labels take more than two values");
  if (distinct.size() == 2) {
    const double lo = *distinct.begin();
    for (double& b : labels) b = (b == lo) ? -1.0 : 1.0;
  } else if (distinct.size() == 1) {
    const double only = *distinct.begin();
    const double mapped = only > 0 ? 1.0 : -1.0;
    for (double& b : labels) b = mapped;
  }
}

std::string to_string(LossKind kind) {
  return kind == LossKind::Quadratic ? "quadratic" : "logistic";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "quadratic") return LossKind::Quadratic;
  if (s == "logistic") return LossKind::Logistic;
  throw ConfigError("unknown loss kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Per-row loss as a function of the margin z = <a, x>.

namespace {

inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  if (t >= 0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double row_loss(LossKind k, double z, double b) {
  if (k == LossKind::Quadratic) return (z - b) * (z - b);
  return softplus(-b * z);
}

inline double row_dloss(LossKind k, double z, double b) {
  if (k == LossKind::Quadratic) return 2.0 * (z - b);
  return -b * sigmoid(-b * z);
}

inline double row_d2loss(LossKind k, double z, double b) {
  if (k == LossKind::Quadratic) return 2.0;
  const double s = sigmoid(-b * z);
  return b * b * s * (1.0 - s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Objective

Objective::Objective(LossModel model, std::shared_ptr<const Dataset> data) : model_(model) {
  shards_.push_back({std::move(data), 1.0});
  init();
}

Objective::Objective(LossModel model, std::vector<Shard> shards)
    : model_(model), shards_(std::move(shards)) {
  init();
}

void Objective::init() {
  if (model_.lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  if (shards_.empty()) throw std::invalid_argument("objective needs at least one shard");
  dim_ = shards_.front().data->dim;
  double total = 0.0;
  total_rows_ = 0;
  for (const auto& s : shards_) {
    if (!s.data) throw std::invalid_argument("null shard");
    if (s.data->dim != dim_) throw std::invalid_argument("shards disagree on dimension");
    if (s.data->rows() == 0) throw std::invalid_argument("empty shard");
    if (!(s.weight > 0)) throw std::invalid_argument("shard weight must be positive");
    total += s.weight;
    total_rows_ += s.data->rows();
  }
  cumulative_weight_.clear();
  double acc = 0.0;
  for (auto& s : shards_) {
    s.weight /= total;
    acc += s.weight;
    cumulative_weight_.push_back(acc);
  }
  cumulative_weight_.back() = 1.0;
}

Objective Objective::average(std::span<const Objective> parts) {
  if (parts.empty()) throw std::invalid_argument("average of no objectives");
  std::vector<Shard> shards;
  const LossModel model = parts.front().model();
  for (const auto& p : parts) {
    if (p.model().kind != model.kind || p.model().lambda != model.lambda)
      throw std::invalid_argument("average: objectives use different loss models");
    for (const auto& s : p.shards()) shards.push_back({s.data, s.weight / parts.size()});
  }
  return Objective(model, std::move(shards));
}

Objective Objective::with_lambda(double lambda) const {
  Objective o = *this;
  if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
  o.model_.lambda = lambda;
  return o;
}

double Objective::value(ConstVecView x) const {
  check_dim(x.size(), dim_, "loss_value");
  double total = 0.0;
  for (const auto& s : shards_) {
    const Dataset& ds = *s.data;
    double acc = 0.0;
    for (std::size_t j = 0; j < ds.rows(); ++j) {
      const auto rw = ds.row(j);
      acc += row_loss(model_.kind, kernels::sparse_dot(rw.idx, rw.val, x), ds.labels[j]);
    }
    total += s.weight * acc / static_cast<double>(ds.rows());
  }
  return total + model_.lambda * kernels::nrm2sq(x);
}

double Objective::value_difference(ConstVecView x, ConstVecView y) const {
  check_dim(x.size(), dim_, "value_difference");
  check_dim(y.size(), dim_, "value_difference");
  Vec diff(dim_), sum(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    diff[i] = x[i] - y[i];
    sum[i] = x[i] + y[i];
  }
  double total = 0.0;
  for (const auto& s : shards_) {
    const Dataset& ds = *s.data;
    double acc = 0.0;
    for (std::size_t j = 0; j < ds.rows(); ++j) {
      const auto rw = ds.row(j);
      const double b = ds.labels[j];
      const double zy = kernels::sparse_dot(rw.idx, rw.val, y);
      const double dz = kernels::sparse_dot(rw.idx, rw.val, diff);
      if (model_.kind == LossKind::Quadratic) {
        acc += dz * (2.0 * (zy - b) + dz);
      } else {
        // softplus(u) - softplus(v) = log1p(sigmoid(v) * expm1(u - v))
        const double v = -b * zy;
        const double du = -b * dz;
        acc += std::abs(du) < 1.0 ? std::log1p(sigmoid(v) * std::expm1(du))
                                  : softplus(v + du) - softplus(v);
      }
    }
    total += s.weight * acc / static_cast<double>(ds.rows());
  }
  return total + model_.lambda * kernels::dot(diff, sum);
}

Vec Objective::gradient(ConstVecView x) const {
  Vec g(dim_);
  gradient(x, g);
  return g;
}

void Objective::gradient(ConstVecView x, VecView out) const {
  check_dim(x.size(), dim_, "loss_grad");
  check_dim(out.size(), dim_, "loss_grad");
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& s : shards_) {
    const Dataset& ds = *s.data;
    const double scale = s.weight / static_cast<double>(ds.rows());
    for (std::size_t j = 0; j < ds.rows(); ++j) {
      const auto rw = ds.row(j);
      const double z = kernels::sparse_dot(rw.idx, rw.val, x);
      kernels::sparse_axpy(scale * row_dloss(model_.kind, z, ds.labels[j]), rw.idx, rw.val, out);
    }
  }
  kernels::axpy(2.0 * model_.lambda, x, out);
}

Vec Objective::hessian_vec(ConstVecView x, ConstVecView v) const {
  Vec out(dim_);
  hessian_vec(x, v, out);
  return out;
}

void Objective::hessian_vec(ConstVecView x, ConstVecView v, VecView out) const {
  check_dim(x.size(), dim_, "hessian_vec");
  check_dim(v.size(), dim_, "hessian_vec");
  check_dim(out.size(), dim_, "hessian_vec");
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& s : shards_) {
    const Dataset& ds = *s.data;
    const double scale = s.weight / static_cast<double>(ds.rows());
    for (std::size_t j = 0; j < ds.rows(); ++j) {
      const auto rw = ds.row(j);
      const double av = kernels::sparse_dot(rw.idx, rw.val, v);
      if (av == 0.0) continue;
      double curv = 2.0;
      if (model_.kind == LossKind::Logistic)
        curv = row_d2loss(model_.kind, kernels::sparse_dot(rw.idx, rw.val, x), ds.labels[j]);
      kernels::sparse_axpy(scale * curv * av, rw.idx, rw.val, out);
    }
  }
  kernels::axpy(2.0 * model_.lambda, v, out);
}

Objective::Component Objective::sample_component(Rng& rng) const {
  std::uint32_t shard = 0;
  if (shards_.size() > 1) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    shard = static_cast<std::uint32_t>(
        std::upper_bound(cumulative_weight_.begin(), cumulative_weight_.end(), u) -
        cumulative_weight_.begin());
    if (shard >= shards_.size()) shard = static_cast<std::uint32_t>(shards_.size() - 1);
  }
  const auto n = shards_[shard].data->rows();
  const auto row = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  return {shard, static_cast<std::uint32_t>(row)};
}

void Objective::add_component_grad(Component c, ConstVecView x, double scale,
                                   VecView out) const {
  const Dataset& ds = *shards_[c.shard].data;
  const auto rw = ds.row(c.row);
  const double z = kernels::sparse_dot(rw.idx, rw.val, x);
  kernels::sparse_axpy(scale * row_dloss(model_.kind, z, ds.labels[c.row]), rw.idx, rw.val, out);
  kernels::axpy(scale * 2.0 * model_.lambda, x, out);
}

// ---------------------------------------------------------------------------
// Constants and reference solution

SpectralEstimate estimate_smoothness(const Objective& obj, int iters, double tol) {
  if (iters < 1) throw std::invalid_argument("estimate_smoothness: iters must be >= 1");
  const Vec origin(obj.dim(), 0.0);
  return spectral_norm([&](ConstVecView in, VecView out) { obj.hessian_vec(origin, in, out); },
                       obj.dim(), tol, iters);
}

double estimate_strong_convexity(const Objective& obj) {
  if (obj.model().kind == LossKind::Logistic) return 2.0 * obj.model().lambda;
  const Vec origin(obj.dim(), 0.0);
  const double lmin = dense_min_eigenvalue(dense_hessian(obj, origin));
  return std::max(lmin, 2.0 * obj.model().lambda);
}

ReferenceSolution solve_reference(const Objective& obj, double tol, int max_iter) {
  const std::size_t d = obj.dim();
  const double L = estimate_smoothness(obj, 20000, 1e-10).value * (1.0 + 1e-6);
  if (!(L > 0)) throw std::invalid_argument("solve_reference: zero curvature");
  const double step = 1.0 / L;

  Vec x(d, 0.0), y(d, 0.0), x_prev(d, 0.0), g(d), gy(d);
  obj.gradient(x, g);
  double gnorm = std::sqrt(kernels::nrm2sq(g));
  Vec best = x;
  double best_norm = gnorm;
  double t = 1.0;
  int it = 0;
  for (; it < max_iter && gnorm > tol; ++it) {
    obj.gradient(y, gy);
    x_prev = x;
    for (std::size_t i = 0; i < d; ++i) x[i] = y[i] - step * gy[i];
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Gradient-based adaptive restart.
    double restart = 0.0;
    for (std::size_t i = 0; i < d; ++i) restart += gy[i] * (x[i] - x_prev[i]);
    if (restart > 0) {
      t = 1.0;
      y = x;
    } else {
      const double beta = (t - 1.0) / t_next;
      for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + beta * (x[i] - x_prev[i]);
      t = t_next;
    }
    obj.gradient(x, g);
    gnorm = std::sqrt(kernels::nrm2sq(g));
    if (!std::isfinite(gnorm)) break;
    if (gnorm < best_norm) {
      best_norm = gnorm;
      best = x;
    }
  }
  if (!(best_norm <= tol)) {
    throw ReferenceSolveError("solve_reference: gradient norm " + std::to_string(best_norm) +
                                  " above tolerance after " + std::to_string(it) + " iterations",
                              best, best_norm);
  }
  ReferenceSolution sol;
  sol.x = std::move(best);
  sol.value = obj.value(sol.x);
  sol.grad_norm = best_norm;
  sol.iterations = it;
  return sol;
}

}  // namespace aseg

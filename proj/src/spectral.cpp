#include "aseg/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "aseg/rng.hpp"

namespace aseg {

namespace {

// Krylov basis cap before an explicit restart from the best Ritz vector.
constexpr std::size_t kMaxBasis = 400;

}  // namespace

SpectralEstimate spectral_norm(const LinearOp& op, std::size_t dim, double tol, int max_iter) {
  SpectralEstimate est;
  if (dim == 0) {
    est.converged = true;
    return est;
  }
  // Lanczos with full reorthogonalization. A plain power iteration stalls when
  // the extreme eigenvalues of an indefinite operator have close magnitudes.
  Vec start(dim);
  std::uint64_t s = 0x5eedULL;
  for (auto& vi : start) {
    s = splitmix64(s);
    vi = 0.5 + static_cast<double>(s >> 11) * 0x1.0p-53;
  }

  const std::size_t basis_cap = std::min(dim, kMaxBasis);
  Eigen::MatrixXd V(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(basis_cap));
  Vec w(dim);
  int used = 0;

  while (used < max_iter) {
    Eigen::Map<Eigen::VectorXd> v0(start.data(), static_cast<Eigen::Index>(dim));
    const double n0 = v0.norm();
    if (n0 == 0.0) {
      est.converged = true;
      return est;
    }
    V.col(0) = v0 / n0;
    std::vector<double> alpha, beta;
    std::size_t k = 0;
    bool invariant = false;
    double best_val = 0.0;
    Eigen::VectorXd best_vec;
    for (;;) {
      Vec vk(V.col(static_cast<Eigen::Index>(k)).data(),
             V.col(static_cast<Eigen::Index>(k)).data() + dim);
      op(vk, w);
      ++used;
      Eigen::Map<Eigen::VectorXd> wm(w.data(), static_cast<Eigen::Index>(dim));
      const double a = V.col(static_cast<Eigen::Index>(k)).dot(wm);
      alpha.push_back(a);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        const auto Vk = V.leftCols(static_cast<Eigen::Index>(k + 1));
        const Eigen::VectorXd h = Vk.transpose() * wm;
        wm -= Vk * h;
      }
      const double b = wm.norm();

      const auto m = static_cast<Eigen::Index>(k + 1);
      Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
      Eigen::VectorXd sub = m > 1 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(beta.data(), m - 1))
                                  : Eigen::VectorXd();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      const Eigen::Index top =
          std::abs(es.eigenvalues()(0)) >= std::abs(es.eigenvalues()(m - 1)) ? 0 : m - 1;
      best_val = std::abs(es.eigenvalues()(top));
      best_vec = es.eigenvectors().col(top);
      const double residual = b * std::abs(best_vec(m - 1));
      est.value = best_val;
      est.iterations = used;

      const double scale = std::max(best_val, std::abs(a));
      invariant = b <= 1e-14 * std::max(scale, 1e-300) || k + 1 == dim;
      if (invariant || residual <= tol * best_val) {
        est.converged = true;
        return est;
      }
      if (k + 1 == basis_cap || used >= max_iter) break;
      beta.push_back(b);
      V.col(static_cast<Eigen::Index>(k + 1)) = wm / b;
      ++k;
    }
    // Restart from the current best Ritz vector.
    const Eigen::VectorXd ritz = V.leftCols(best_vec.size()) * best_vec;
    for (std::size_t i = 0; i < dim; ++i) start[i] = ritz(static_cast<Eigen::Index>(i));
  }
  return est;
}

}  // namespace aseg

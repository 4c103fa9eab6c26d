#include "aseg/dense.hpp"

#include <Eigen/Eigenvalues>

#include "aseg/kernels.hpp"

namespace aseg {

Eigen::MatrixXd dense_hessian(const Objective& obj, ConstVecView x) {
  check_dim(x.size(), obj.dim(), "dense_hessian");
  const auto d = static_cast<Eigen::Index>(obj.dim());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  const LossKind kind = obj.model().kind;
  for (const auto& s : obj.shards()) {
    const Dataset& ds = *s.data;
    const double scale = s.weight / static_cast<double>(ds.rows());
    for (std::size_t j = 0; j < ds.rows(); ++j) {
      const auto rw = ds.row(j);
      double curv = 2.0;
      if (kind == LossKind::Logistic) {
        const double z = kernels::sparse_dot(rw.idx, rw.val, x);
        const double b = ds.labels[j];
        const double t = -b * z;
        const double sg = t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
        curv = b * b * sg * (1.0 - sg);
      }
      const double c = scale * curv;
      for (std::size_t p = 0; p < rw.idx.size(); ++p)
        for (std::size_t q = 0; q < rw.idx.size(); ++q)
          H(rw.idx[p], rw.idx[q]) += c * rw.val[p] * rw.val[q];
    }
  }
  H.diagonal().array() += 2.0 * obj.model().lambda;
  return H;
}

double dense_spectral_norm(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double dense_min_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace aseg

#include "aseg/kernels.hpp"

namespace aseg::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double nrm2sq_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

double sparse_dot_scalar(const std::int32_t* idx, const double* val, std::size_t nnz,
                         const double* dense) {
  double s = 0.0;
  for (std::size_t i = 0; i < nnz; ++i) s += val[i] * dense[idx[i]];
  return s;
}

void sparse_axpy_scalar(double alpha, const std::int32_t* idx, const double* val,
                        std::size_t nnz, double* dense) {
  for (std::size_t i = 0; i < nnz; ++i) dense[idx[i]] += alpha * val[i];
}

}  // namespace

const Table& scalar() {
  static const Table t{"scalar", dot_scalar, axpy_scalar, nrm2sq_scalar, sparse_dot_scalar,
                       sparse_axpy_scalar};
  return t;
}

}  // namespace aseg::kernels

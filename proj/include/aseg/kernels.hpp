#pragma once

// Arithmetic inner loops shared by every oracle in the library.
//
// Each kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant. The variant is picked once per process (see active()) so that a
// given machine always reduces in the same order and traces stay bit-stable.
// Set ASEG_KERNELS=scalar to force the reference path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace aseg::kernels {

struct Table {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*nrm2sq)(const double* x, std::size_t n);
  double (*sparse_dot)(const std::int32_t* idx, const double* val, std::size_t nnz,
                       const double* dense);
  void (*sparse_axpy)(double alpha, const std::int32_t* idx, const double* val,
                      std::size_t nnz, double* dense);
};

const Table& scalar();
/// nullptr when the build or the CPU lacks AVX2/FMA.
const Table* avx2();
const Table& active();

// Convenience wrappers over active().
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double nrm2sq(std::span<const double> x) { return active().nrm2sq(x.data(), x.size()); }
inline double sparse_dot(std::span<const std::int32_t> idx, std::span<const double> val,
                         std::span<const double> dense) {
  return active().sparse_dot(idx.data(), val.data(), idx.size(), dense.data());
}
inline void sparse_axpy(double alpha, std::span<const std::int32_t> idx,
                        std::span<const double> val, std::span<double> dense) {
  active().sparse_axpy(alpha, idx.data(), val.data(), idx.size(), dense.data());
}

}  // namespace aseg::kernels

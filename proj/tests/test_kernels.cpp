#include <cmath>
#include <random>
#include <vector>

#include "aseg/kernels.hpp"
#include "doctest.h"

namespace k = aseg::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double abs_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return s;
}

}  // namespace

TEST_CASE("scalar reference kernels") {
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(k::scalar().dot(a, b, 3) == 12.0);
  CHECK(k::scalar().nrm2sq(a, 3) == 14.0);
  double y[] = {1, 1, 1};
  k::scalar().axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  const std::int32_t idx[] = {0, 2};
  const double val[] = {10, 100};
  CHECK(k::scalar().sparse_dot(idx, val, 2, b) == 640.0);
  double dense[] = {0, 0, 0};
  k::scalar().sparse_axpy(0.5, idx, val, 2, dense);
  CHECK(dense[0] == 5.0);
  CHECK(dense[1] == 0.0);
  CHECK(dense[2] == 50.0);
}

TEST_CASE("active table is one of the known variants") {
  const auto name = k::active().name;
  CHECK((name == k::scalar().name || (k::avx2() && name == k::avx2()->name)));
}

TEST_CASE("SIMD variants agree with the scalar reference") {
  const k::Table* simd = k::avx2();
  if (!simd) {
    MESSAGE("no SIMD variant on this machine");
    return;
  }
  std::mt19937_64 rng(42);
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto a = rand_vec(n, rng);
    const auto b = rand_vec(n, rng);
    const double tol = 4 * n * 1.1e-16 * abs_dot(a, b) + 1e-300;
    CHECK(std::abs(simd->dot(a.data(), b.data(), n) - k::scalar().dot(a.data(), b.data(), n)) <=
          tol);
    CHECK(std::abs(simd->nrm2sq(a.data(), n) - k::scalar().nrm2sq(a.data(), n)) <=
          4 * n * 1.1e-16 * abs_dot(a, a) + 1e-300);

    auto y1 = b, y2 = b;
    simd->axpy(0.37, a.data(), y1.data(), n);
    k::scalar().axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(y1[i] - y2[i]) <= 2.3e-16 * (std::abs(b[i]) + std::abs(0.37 * a[i])));
  }
}

TEST_CASE("sparse SIMD variants agree with the scalar reference") {
  const k::Table* simd = k::avx2();
  if (!simd) return;
  std::mt19937_64 rng(7);
  const std::size_t dim = 200;
  const auto dense = rand_vec(dim, rng);
  for (std::size_t nnz = 0; nnz <= 40; ++nnz) {
    std::vector<std::int32_t> idx;
    for (std::size_t j = 0; j < nnz; ++j) idx.push_back(static_cast<std::int32_t>(j * 4 + (j % 3)));
    const auto val = rand_vec(nnz, rng);
    double mag = 0;
    for (std::size_t j = 0; j < nnz; ++j) mag += std::abs(val[j] * dense[idx[j]]);
    const double s = k::scalar().sparse_dot(idx.data(), val.data(), nnz, dense.data());
    const double v = simd->sparse_dot(idx.data(), val.data(), nnz, dense.data());
    CHECK(std::abs(s - v) <= 4 * (nnz + 1) * 1.1e-16 * mag + 1e-300);

    auto d1 = dense, d2 = dense;
    simd->sparse_axpy(-1.3, idx.data(), val.data(), nnz, d1.data());
    k::scalar().sparse_axpy(-1.3, idx.data(), val.data(), nnz, d2.data());
    for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs(d1[i] - d2[i]) <= 1e-15 * (1 + std::abs(d2[i])));
  }
}

TEST_CASE("kernels are deterministic across calls") {
  std::mt19937_64 rng(3);
  const auto a = rand_vec(1001, rng);
  const auto b = rand_vec(1001, rng);
  const double first = k::dot(a, b);
  for (int r = 0; r < 5; ++r) CHECK(k::dot(a, b) == first);
}

// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "aseg/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace aseg::kernels {
namespace detail {

namespace {

// Fixed lane-combination order so results are reproducible.
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double nrm2sq_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

double sparse_dot_avx2(const std::int32_t* idx, const double* val, std::size_t nnz,
                       const double* dense) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= nnz; i += 4) {
    __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    __m256d g = _mm256_i32gather_pd(dense, vi, 8);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(val + i), g, acc);
  }
  double s = hsum(acc);
  for (; i < nnz; ++i) s += val[i] * dense[idx[i]];
  return s;
}

// No scatter in AVX2; the gather-free scalar loop is already memory bound.
void sparse_axpy_avx2(double alpha, const std::int32_t* idx, const double* val,
                      std::size_t nnz, double* dense) {
  for (std::size_t i = 0; i < nnz; ++i) dense[idx[i]] += alpha * val[i];
}

}  // namespace

const Table* avx2_table() {
  static const Table t{"avx2", dot_avx2, axpy_avx2, nrm2sq_avx2, sparse_dot_avx2,
                       sparse_axpy_avx2};
  return &t;
}

}  // namespace detail
}  // namespace aseg::kernels

#else

namespace aseg::kernels::detail {
const Table* avx2_table() { return nullptr; }
}  // namespace aseg::kernels::detail

#endif

// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "nlv/simd/kernels.hpp"

#include <immintrin.h>

namespace nlv::simd::avx2 {

namespace {

// Lanes are summed in a fixed order so results do not depend on alignment.
inline double hsum(__m256d v) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, v);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out) {
  const std::size_t n = w.size();
  const std::size_t nv = n - n % 4;
  __m256d acc[kMaxGramRows * (kMaxGramRows + 1) / 2];
  const int npairs = m * (m + 1) / 2;
  for (int p = 0; p < npairs; ++p) acc[p] = _mm256_setzero_pd();

  __m256d wr[kMaxGramRows];
  for (std::size_t q = 0; q < nv; q += 4) {
    const __m256d wq = _mm256_loadu_pd(w.data() + q);
    for (int k = 0; k < m; ++k) wr[k] = _mm256_loadu_pd(rows[k] + q);
    int p = 0;
    for (int k = 0; k < m; ++k) {
      const __m256d wk = _mm256_mul_pd(wq, wr[k]);
      for (int l = k; l < m; ++l, ++p) acc[p] = _mm256_fmadd_pd(wk, wr[l], acc[p]);
    }
  }

  int p = 0;
  for (int k = 0; k < m; ++k) {
    for (int l = k; l < m; ++l, ++p) {
      double s = hsum(acc[p]);
      for (std::size_t q = nv; q < n; ++q) s += w[q] * rows[k][q] * rows[l][q];
      out[k * m + l] += s;
      if (l != k) out[l * m + k] += s;
    }
  }
}

double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = w.size();
  const std::size_t nv = n - n % 4;
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t q = 0; q < nv; q += 4) {
    const __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(w.data() + q), _mm256_loadu_pd(a.data() + q));
    acc = _mm256_fmadd_pd(wa, _mm256_loadu_pd(b.data() + q), acc);
  }
  double s = hsum(acc);
  for (std::size_t q = nv; q < n; ++q) s += w[q] * a[q] * b[q];
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t nv = n - n % 8;
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (std::size_t q = 0; q < nv; q += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + q), _mm256_loadu_pd(b.data() + q), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + q + 4), _mm256_loadu_pd(b.data() + q + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (std::size_t q = nv; q < n; ++q) s += a[q] * b[q];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const std::size_t nv = n - n % 4;
  const __m256d va = _mm256_set1_pd(alpha);
  for (std::size_t q = 0; q < nv; q += 4) {
    const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + q), _mm256_loadu_pd(y.data() + q));
    _mm256_storeu_pd(y.data() + q, vy);
  }
  for (std::size_t q = nv; q < n; ++q) y[q] += alpha * x[q];
}

}  // namespace nlv::simd::avx2

#include "nlv/simd/kernels.hpp"

#if defined(NLV_HAVE_NEON_PATH)
#include <arm_neon.h>

namespace nlv::simd::neon {

namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

}  // namespace

void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out) {
  const std::size_t n = w.size();
  const std::size_t nv = n - n % 2;
  float64x2_t acc[kMaxGramRows * (kMaxGramRows + 1) / 2];
  const int npairs = m * (m + 1) / 2;
  for (int p = 0; p < npairs; ++p) acc[p] = vdupq_n_f64(0.0);

  float64x2_t wr[kMaxGramRows];
  for (std::size_t q = 0; q < nv; q += 2) {
    const float64x2_t wq = vld1q_f64(w.data() + q);
    for (int k = 0; k < m; ++k) wr[k] = vld1q_f64(rows[k] + q);
    int p = 0;
    for (int k = 0; k < m; ++k) {
      const float64x2_t wk = vmulq_f64(wq, wr[k]);
      for (int l = k; l < m; ++l, ++p) acc[p] = vfmaq_f64(acc[p], wk, wr[l]);
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
  const std::size_t nv = n - n % 2;
  float64x2_t acc = vdupq_n_f64(0.0);
  for (std::size_t q = 0; q < nv; q += 2) {
    const float64x2_t wa = vmulq_f64(vld1q_f64(w.data() + q), vld1q_f64(a.data() + q));
    acc = vfmaq_f64(acc, wa, vld1q_f64(b.data() + q));
  }
  double s = hsum(acc);
  for (std::size_t q = nv; q < n; ++q) s += w[q] * a[q] * b[q];
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t nv = n - n % 2;
  float64x2_t acc = vdupq_n_f64(0.0);
  for (std::size_t q = 0; q < nv; q += 2) acc = vfmaq_f64(acc, vld1q_f64(a.data() + q), vld1q_f64(b.data() + q));
  double s = hsum(acc);
  for (std::size_t q = nv; q < n; ++q) s += a[q] * b[q];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const std::size_t nv = n - n % 2;
  const float64x2_t va = vdupq_n_f64(alpha);
  for (std::size_t q = 0; q < nv; q += 2) vst1q_f64(y.data() + q, vfmaq_f64(vld1q_f64(y.data() + q), va, vld1q_f64(x.data() + q)));
  for (std::size_t q = nv; q < n; ++q) y[q] += alpha * x[q];
}

}  // namespace nlv::simd::neon
#endif

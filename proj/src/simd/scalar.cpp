#include "nlv/simd/kernels.hpp"

namespace nlv::simd::scalar {

void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out) {
  const std::size_t n = w.size();
  for (int k = 0; k < m; ++k) {
    for (int l = k; l < m; ++l) {
      double acc = 0.0;
      for (std::size_t q = 0; q < n; ++q) acc += w[q] * rows[k][q] * rows[l][q];
      out[k * m + l] += acc;
      if (l != k) out[l * m + k] += acc;
    }
  }
}

double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t q = 0; q < w.size(); ++q) acc += w[q] * a[q] * b[q];
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t q = 0; q < a.size(); ++q) acc += a[q] * b[q];
  return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t q = 0; q < x.size(); ++q) y[q] += alpha * x[q];
}

}  // namespace nlv::simd::scalar

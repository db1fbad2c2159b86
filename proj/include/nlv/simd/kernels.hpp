#pragma once
// Data-parallel inner loops used by pair-quadrature assembly and the Krylov
// solvers. Every kernel has a scalar reference implementation; vector variants
// (AVX2+FMA on x86-64, NEON on aarch64) are selected once at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace nlv::simd {

enum class Level { scalar, avx2, neon };

/// Best level supported by the running CPU and compiled into the binary.
Level detect();

/// Level used by the dispatched kernels below. Initialized from detect(),
/// overridable with NLV_SIMD=scalar|avx2|neon or set_level().
Level active_level();

/// Returns false (and leaves the level unchanged) if `level` is unavailable.
bool set_level(Level level);

std::string_view level_name(Level level);

inline constexpr int kMaxGramRows = 8;

/// out[k*m + l] += sum_q w[q] * rows[k][q] * rows[l][q] for k,l < m.
/// Each rows[k] points at w.size() doubles. m <= kMaxGramRows.
void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out);

/// sum_q w[q] * a[q] * b[q]
double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Per-level entry points, exposed for equivalence testing.
namespace scalar {
void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out);
double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define NLV_HAVE_AVX2_PATH 1
namespace avx2 {
void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out);
double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace avx2
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
#define NLV_HAVE_NEON_PATH 1
namespace neon {
void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out);
double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace neon
#endif

}  // namespace nlv::simd

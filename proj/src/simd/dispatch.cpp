#include "nlv/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace nlv::simd {

namespace {

bool available(Level level) {
  switch (level) {
    case Level::scalar:
      return true;
    case Level::avx2:
#if defined(NLV_HAVE_AVX2_PATH) && (defined(__GNUC__) || defined(__clang__))
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Level::neon:
#if defined(NLV_HAVE_NEON_PATH)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Level initial_level() {
  if (const char* env = std::getenv("NLV_SIMD")) {
    const std::string name(env);
    for (Level l : {Level::scalar, Level::avx2, Level::neon}) {
      if (name == level_name(l) && available(l)) return l;
    }
  }
  return detect();
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

Level detect() {
  if (available(Level::avx2)) return Level::avx2;
  if (available(Level::neon)) return Level::neon;
  return Level::scalar;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

bool set_level(Level level) {
  if (!available(level)) return false;
  current().store(level, std::memory_order_relaxed);
  return true;
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
  }
  return "unknown";
}

#if defined(NLV_HAVE_AVX2_PATH)
#define NLV_AVX2_CASE(call) \
  case Level::avx2:         \
    return avx2::call;
#else
#define NLV_AVX2_CASE(call)
#endif
#if defined(NLV_HAVE_NEON_PATH)
#define NLV_NEON_CASE(call) \
  case Level::neon:         \
    return neon::call;
#else
#define NLV_NEON_CASE(call)
#endif

#define NLV_DISPATCH(call)       \
  switch (active_level()) {      \
    NLV_AVX2_CASE(call)          \
    NLV_NEON_CASE(call)          \
    default:                     \
      return scalar::call;       \
  }

void weighted_gram(std::span<const double> w, const double* const* rows, int m, double* out) {
  NLV_DISPATCH(weighted_gram(w, rows, m, out))
}

double weighted_dot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
  NLV_DISPATCH(weighted_dot(w, a, b))
}

double dot(std::span<const double> a, std::span<const double> b) { NLV_DISPATCH(dot(a, b)) }

void axpy(double alpha, std::span<const double> x, std::span<double> y) { NLV_DISPATCH(axpy(alpha, x, y)) }

}  // namespace nlv::simd

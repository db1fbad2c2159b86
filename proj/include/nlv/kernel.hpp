#pragma once
// Variable-order singular kernel: order field beta(x), diffusion tensor
// a(t,x,y), horizon epsilon, and the two-point functions alpha and gamma built
// from them.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nlv {

/// Spatial point; for one-dimensional problems only the first coordinate is used.
using Point = std::array<double, 2>;
/// Row-major 2x2 matrix; for one-dimensional problems only entry 0 is used.
using Mat2 = std::array<double, 4>;
using Vec2 = std::array<double, 2>;

double distance(const Point& x, const Point& y, int dim);

struct OrderField {
  std::function<double(const Point&)> eval;
  double beta_lo = 0.5;
  double beta_hi = 0.5;
  std::optional<double> lipschitz_bound;
  bool is_constant = false;
  std::string name;

  double operator()(const Point& x) const { return eval(x); }

  static OrderField constant(double beta);
  /// beta(x) = mean + amplitude * sin(pi * x_1)
  static OrderField sine(double mean, double amplitude);
  /// beta(x) = base + height * exp(-|x - center|^2 / width^2)
  static OrderField bump(double base, double height, Point center, double width);
  /// Piecewise-linear interpolant of (nodes, values) along the first coordinate.
  /// Bounds default to the min/max of the values.
  static OrderField piecewise_linear(std::vector<double> nodes, std::vector<double> values);
};

struct DiffusionTensor {
  std::function<Mat2(double, const Point&, const Point&)> eval;
  std::function<Mat2(double, const Point&, const Point&)> dt_eval;
  double a_lo = 1.0;
  double a_hi = 1.0;
  bool time_independent = true;
  /// When set, a(t,x,y) = time_scale(t) / time_scale(0) * a(0,x,y).
  std::function<double(double)> time_scale;
  std::string name;

  static DiffusionTensor identity();
  static DiffusionTensor scaled_identity(double c);
  /// a(t,x,y) = (1 + c sin(omega t)) I
  static DiffusionTensor time_periodic(double c, double omega);
  /// Constant symmetric matrix with user-declared bounds (no checking here).
  static DiffusionTensor constant_matrix(Mat2 a, double a_lo, double a_hi);
};

struct KernelSpec {
  OrderField order;
  DiffusionTensor tensor;
  double horizon = 1.0;
  int dim = 1;
  /// Use gamma_sym = (gamma(x,y) + gamma(y,x)) / 2 in pointwise operators.
  bool symmetrize = true;
};

/// alpha(x,y) = (y-x) / |y-x|^{n/2 + beta(x) + 1} inside the horizon, else 0.
/// Throws std::domain_error for coincident points.
Vec2 eval_alpha(const Point& x, const Point& y, const KernelSpec& spec);

/// Antisymmetric part (alpha(x,y) - alpha(y,x)) / 2.
Vec2 eval_alpha_antisym(const Point& x, const Point& y, const KernelSpec& spec);

/// gamma(t,x,y) = (y-x).a(t,x,y).(y-x) / |y-x|^{n + 2 beta(x) + 2} inside the
/// horizon, else 0. Symmetrized when spec.symmetrize is set.
double eval_gamma(double t, const Point& x, const Point& y, const KernelSpec& spec);

/// Unsymmetrized gamma regardless of spec.symmetrize.
double eval_gamma_literal(double t, const Point& x, const Point& y, const KernelSpec& spec);

struct Box {
  Point lo{-1.0, -1.0};
  Point hi{2.0, 2.0};
};

struct ValidationReport {
  bool pass = true;
  int samples = 0;
  // Worst violations; a value <= 0 means the invariant held on every sample.
  double order_bounds = 0.0;   // max(beta_lo - beta(x), beta(x) - beta_hi)
  double order_range = 0.0;    // structural: 0 < beta_lo <= beta_hi < 1
  double lipschitz = 0.0;      // |beta(x)-beta(y)| - L|x-y|
  double tensor_symmetry = 0.0;  // max |a - a^T| and |a(x,y) - a(y,x)|
  double ellipticity_lo = 0.0;   // a_lo - lambda_min(a)
  double ellipticity_hi = 0.0;   // lambda_max(a) - a_hi
  double time_derivative = 0.0;  // lambda_max(dt a) - a_hi
  double horizon = 0.0;          // -epsilon when epsilon > 0
  std::vector<std::string> failures;
};

inline constexpr double kValidationTolerance = 1e-12;

/// Samples (t, x, y) uniformly in [0,1] x box x box and reports worst-case
/// violations of the order-field and tensor invariants. Never throws.
ValidationReport validate_spec(const KernelSpec& spec, int sample_count, std::uint64_t seed,
                               const Box& box = {});

}  // namespace nlv

#include "nlv/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace nlv {

double distance(const Point& x, const Point& y, int dim) {
  const double d0 = y[0] - x[0];
  if (dim == 1) return std::abs(d0);
  const double d1 = y[1] - x[1];
  return std::hypot(d0, d1);
}

OrderField OrderField::constant(double beta) {
  OrderField f;
  f.eval = [beta](const Point&) { return beta; };
  f.beta_lo = f.beta_hi = beta;
  f.lipschitz_bound = 0.0;
  f.is_constant = true;
  f.name = "constant";
  return f;
}

OrderField OrderField::sine(double mean, double amplitude) {
  OrderField f;
  f.eval = [mean, amplitude](const Point& x) { return mean + amplitude * std::sin(std::numbers::pi * x[0]); };
  f.beta_lo = mean - std::abs(amplitude);
  f.beta_hi = mean + std::abs(amplitude);
  f.lipschitz_bound = std::numbers::pi * std::abs(amplitude);
  f.is_constant = amplitude == 0.0;
  f.name = "sine";
  return f;
}

OrderField OrderField::bump(double base, double height, Point center, double width) {
  OrderField f;
  f.eval = [=](const Point& x) {
    const double dx = x[0] - center[0];
    const double dy = x[1] - center[1];
    return base + height * std::exp(-(dx * dx + dy * dy) / (width * width));
  };
  f.beta_lo = std::min(base, base + height);
  f.beta_hi = std::max(base, base + height);
  // max |d/dr h exp(-r^2/w^2)| = |h| sqrt(2) exp(-1/2) / w
  f.lipschitz_bound = std::abs(height) * std::sqrt(2.0) * std::exp(-0.5) / width;
  f.is_constant = height == 0.0;
  f.name = "bump";
  return f;
}

OrderField OrderField::piecewise_linear(std::vector<double> nodes, std::vector<double> values) {
  if (nodes.size() < 2 || nodes.size() != values.size()) {
    throw std::invalid_argument("piecewise_linear: need matching node/value lists of length >= 2");
  }
  if (!std::is_sorted(nodes.begin(), nodes.end())) throw std::invalid_argument("piecewise_linear: nodes must be sorted");
  OrderField f;
  f.beta_lo = *std::min_element(values.begin(), values.end());
  f.beta_hi = *std::max_element(values.begin(), values.end());
  double lip = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    lip = std::max(lip, std::abs(values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i]));
  }
  f.lipschitz_bound = lip;
  f.is_constant = f.beta_lo == f.beta_hi;
  f.eval = [nodes = std::move(nodes), values = std::move(values)](const Point& x) {
    const double s = x[0];
    if (s <= nodes.front()) return values.front();
    if (s >= nodes.back()) return values.back();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - nodes.begin()) - 1;
    const double lam = (s - nodes[i]) / (nodes[i + 1] - nodes[i]);
    return (1.0 - lam) * values[i] + lam * values[i + 1];
  };
  f.name = "piecewise_linear";
  return f;
}

DiffusionTensor DiffusionTensor::identity() { return scaled_identity(1.0); }

DiffusionTensor DiffusionTensor::scaled_identity(double c) {
  DiffusionTensor a;
  a.eval = [c](double, const Point&, const Point&) { return Mat2{c, 0.0, 0.0, c}; };
  a.dt_eval = [](double, const Point&, const Point&) { return Mat2{0.0, 0.0, 0.0, 0.0}; };
  a.a_lo = a.a_hi = c;
  a.time_independent = true;
  a.name = c == 1.0 ? "identity" : "scaled_identity";
  return a;
}

DiffusionTensor DiffusionTensor::time_periodic(double c, double omega) {
  DiffusionTensor a;
  a.eval = [c, omega](double t, const Point&, const Point&) {
    const double s = 1.0 + c * std::sin(omega * t);
    return Mat2{s, 0.0, 0.0, s};
  };
  a.dt_eval = [c, omega](double t, const Point&, const Point&) {
    const double s = c * omega * std::cos(omega * t);
    return Mat2{s, 0.0, 0.0, s};
  };
  a.a_lo = 1.0 - std::abs(c);
  a.a_hi = 1.0 + std::abs(c);
  a.time_independent = c == 0.0 || omega == 0.0;
  a.time_scale = [c, omega](double t) { return 1.0 + c * std::sin(omega * t); };
  a.name = "time_periodic";
  return a;
}

DiffusionTensor DiffusionTensor::constant_matrix(Mat2 m, double a_lo, double a_hi) {
  DiffusionTensor a;
  a.eval = [m](double, const Point&, const Point&) { return m; };
  a.dt_eval = [](double, const Point&, const Point&) { return Mat2{0.0, 0.0, 0.0, 0.0}; };
  a.a_lo = a_lo;
  a.a_hi = a_hi;
  a.time_independent = true;
  a.name = "constant_matrix";
  return a;
}

namespace {

void require_distinct(double r) {
  if (!(r > 0.0)) throw std::domain_error("kernel evaluated at coincident points");
}

double quadratic_form(const Mat2& a, double d0, double d1, int dim) {
  if (dim == 1) return a[0] * d0 * d0;
  return a[0] * d0 * d0 + (a[1] + a[2]) * d0 * d1 + a[3] * d1 * d1;
}

}  // namespace

Vec2 eval_alpha(const Point& x, const Point& y, const KernelSpec& spec) {
  const double r = distance(x, y, spec.dim);
  require_distinct(r);
  if (r > spec.horizon) return {0.0, 0.0};
  const double scale = std::pow(r, -(0.5 * spec.dim + spec.order(x) + 1.0));
  return {(y[0] - x[0]) * scale, spec.dim == 1 ? 0.0 : (y[1] - x[1]) * scale};
}

Vec2 eval_alpha_antisym(const Point& x, const Point& y, const KernelSpec& spec) {
  const Vec2 axy = eval_alpha(x, y, spec);
  const Vec2 ayx = eval_alpha(y, x, spec);
  return {0.5 * (axy[0] - ayx[0]), 0.5 * (axy[1] - ayx[1])};
}

double eval_gamma_literal(double t, const Point& x, const Point& y, const KernelSpec& spec) {
  const double r = distance(x, y, spec.dim);
  require_distinct(r);
  if (r > spec.horizon) return 0.0;
  const double d0 = y[0] - x[0];
  const double d1 = spec.dim == 1 ? 0.0 : y[1] - x[1];
  const double q = quadratic_form(spec.tensor.eval(t, x, y), d0, d1, spec.dim);
  return q * std::pow(r, -(spec.dim + 2.0 * spec.order(x) + 2.0));
}

double eval_gamma(double t, const Point& x, const Point& y, const KernelSpec& spec) {
  if (!spec.symmetrize) return eval_gamma_literal(t, x, y, spec);
  return 0.5 * (eval_gamma_literal(t, x, y, spec) + eval_gamma_literal(t, y, x, spec));
}

namespace {

// Eigenvalues of the symmetric part of a (ascending).
std::array<double, 2> sym_eigs(const Mat2& a, int dim) {
  if (dim == 1) return {a[0], a[0]};
  const double p = a[0];
  const double q = 0.5 * (a[1] + a[2]);
  const double s = a[3];
  const double mean = 0.5 * (p + s);
  const double rad = std::hypot(0.5 * (p - s), q);
  return {mean - rad, mean + rad};
}

}  // namespace

ValidationReport validate_spec(const KernelSpec& spec, int sample_count, std::uint64_t seed, const Box& box) {
  ValidationReport rep;
  rep.samples = std::max(sample_count, 0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_point = [&] {
    Point p{box.lo[0] + (box.hi[0] - box.lo[0]) * unit(rng), 0.0};
    if (spec.dim == 2) p[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * unit(rng);
    return p;
  };

  const auto& ord = spec.order;
  rep.order_range = std::max({-ord.beta_lo, ord.beta_lo - ord.beta_hi, ord.beta_hi - 1.0});
  rep.horizon = spec.horizon > 0.0 && std::isfinite(spec.horizon) ? -spec.horizon : 1.0;
  rep.order_bounds = -1.0;
  rep.lipschitz = ord.lipschitz_bound ? -1.0 : 0.0;
  rep.tensor_symmetry = 0.0;
  rep.ellipticity_lo = -1.0;
  rep.ellipticity_hi = -1.0;
  rep.time_derivative = -1.0;

  for (int s = 0; s < rep.samples; ++s) {
    const double t = unit(rng);
    const Point x = draw_point();
    const Point y = draw_point();
    const double bx = ord(x);
    const double by = ord(y);
    rep.order_bounds = std::max({rep.order_bounds, ord.beta_lo - bx, bx - ord.beta_hi});
    if (ord.lipschitz_bound) {
      const double r = distance(x, y, spec.dim);
      rep.lipschitz = std::max(rep.lipschitz, std::abs(bx - by) - *ord.lipschitz_bound * r);
    }
    const Mat2 axy = spec.tensor.eval(t, x, y);
    const Mat2 ayx = spec.tensor.eval(t, y, x);
    const int nent = spec.dim == 1 ? 1 : 4;
    for (int k = 0; k < nent; ++k) rep.tensor_symmetry = std::max(rep.tensor_symmetry, std::abs(axy[k] - ayx[k]));
    if (spec.dim == 2) rep.tensor_symmetry = std::max(rep.tensor_symmetry, std::abs(axy[1] - axy[2]));
    const auto ev = sym_eigs(axy, spec.dim);
    rep.ellipticity_lo = std::max(rep.ellipticity_lo, spec.tensor.a_lo - ev[0]);
    rep.ellipticity_hi = std::max(rep.ellipticity_hi, ev[1] - spec.tensor.a_hi);
    const auto evd = sym_eigs(spec.tensor.dt_eval(t, x, y), spec.dim);
    rep.time_derivative = std::max(rep.time_derivative, evd[1] - spec.tensor.a_hi);
  }

  auto check = [&](double v, const char* name) {
    if (v > kValidationTolerance || !std::isfinite(v)) {
      rep.pass = false;
      rep.failures.emplace_back(name);
    }
  };
  check(rep.order_range, "order_range");
  if (ord.beta_lo <= 0.0 || ord.beta_hi >= 1.0) {
    rep.pass = false;
    rep.failures.emplace_back("order_strict_bounds");
  }
  if (spec.tensor.a_lo <= 0.0) {
    rep.pass = false;
    rep.failures.emplace_back("ellipticity_positive");
  }
  check(rep.horizon, "horizon");
  check(rep.order_bounds, "order_bounds");
  check(rep.lipschitz, "lipschitz");
  check(rep.tensor_symmetry, "tensor_symmetry");
  check(rep.ellipticity_lo, "ellipticity_lo");
  check(rep.ellipticity_hi, "ellipticity_hi");
  check(rep.time_derivative, "time_derivative");
  return rep;
}

}  // namespace nlv

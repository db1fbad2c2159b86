#include "oracle.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace oracle {

namespace {

using Fn = std::function<double(double)>;

struct Workspace {
  gsl_integration_workspace* w;
  Workspace() : w(gsl_integration_workspace_alloc(4000)) {}
  ~Workspace() { gsl_integration_workspace_free(w); }
};

double thunk(double x, void* p) { return (*static_cast<const Fn*>(p))(x); }

// Adaptive integral of f over [a, b] with interior breakpoints.
double integrate(const Fn& f, double a, double b, std::vector<double> cuts, double tol) {
  if (!(b > a)) return 0.0;
  std::vector<double> pts{a};
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts)
    if (c > a + 1e-14 * (b - a) && c < b - 1e-14 * (b - a) && c > pts.back() + 1e-14 * (b - a)) pts.push_back(c);
  pts.push_back(b);
  Workspace ws;  // one per call: the integrals are nested
  gsl_function g{&thunk, const_cast<Fn*>(&f)};
  double result = 0.0;
  double err = 0.0;
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  const int status = gsl_integration_qagp(&g, pts.data(), pts.size(), 0.0, tol, 4000, ws.w, &result, &err);
  gsl_set_error_handler(old);
  if (status != GSL_SUCCESS && status != GSL_EROUND && err > 1e3 * tol * std::abs(result) + 1e-300) {
    throw std::runtime_error(std::string("oracle quadrature failed: ") + gsl_strerror(status));
  }
  return result;
}

double hat(const std::vector<double>& nodes, int i, double x) {
  const double xi = nodes[i];
  if (i > 0 && x >= nodes[i - 1] && x <= xi) return (x - nodes[i - 1]) / (xi - nodes[i - 1]);
  if (i + 1 < static_cast<int>(nodes.size()) && x >= xi && x <= nodes[i + 1]) return (nodes[i + 1] - x) / (nodes[i + 1] - xi);
  return 0.0;
}

}  // namespace

double gamma_sym(const Line& l, double x, double y) {
  const double r = std::abs(y - x);
  if (r > l.horizon) return 0.0;
  return 0.5 * l.a * r * r * (std::pow(r, -3.0 - 2.0 * l.beta(x)) + std::pow(r, -3.0 - 2.0 * l.beta(y)));
}

Eigen::MatrixXd stiffness(const Line& l, double tol) {
  const int n = static_cast<int>(l.nodes.size());
  const int ne = n - 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const double eps = l.horizon;
  for (int k1 = 0; k1 < ne; ++k1) {
    for (int k2 = 0; k2 < ne; ++k2) {
      const double x0 = l.nodes[k1], x1 = l.nodes[k1 + 1];
      const double y0 = l.nodes[k2], y1 = l.nodes[k2 + 1];
      if (std::max(0.0, std::max(y0 - x1, x0 - y1)) > eps) continue;
      std::vector<int> loc{k1, k1 + 1};
      for (int j : {k2, k2 + 1})
        if (std::find(loc.begin(), loc.end(), j) == loc.end()) loc.push_back(j);
      for (std::size_t p = 0; p < loc.size(); ++p) {
        for (std::size_t q = p; q < loc.size(); ++q) {
          const int i = loc[p];
          const int j = loc[q];
          Fn outer = [&](double x) {
            Fn inner = [&](double y) {
              if (y == x) return 0.0;
              const double di = hat(l.nodes, i, y) - hat(l.nodes, i, x);
              const double dj = hat(l.nodes, j, y) - hat(l.nodes, j, x);
              return di * dj * gamma_sym(l, x, y);
            };
            return integrate(inner, y0, y1, {x - eps, x, x + eps}, tol);
          };
          const double v = integrate(outer, x0, x1, {y0 - eps, y0, y0 + eps, y1 - eps, y1, y1 + eps}, tol);
          a(i, j) += v;
          if (i != j) a(j, i) += v;
        }
      }
    }
  }
  return a;
}

double interaction(const Line& l, const std::vector<double>& u, double x, double tol) {
  const auto& nd = l.nodes;
  auto value = [&](double y) {
    const auto it = std::upper_bound(nd.begin(), nd.end(), y);
    std::size_t i = it == nd.begin() ? 0 : static_cast<std::size_t>(it - nd.begin()) - 1;
    if (i + 1 >= nd.size()) i = nd.size() - 2;
    const double s = (y - nd[i]) / (nd[i + 1] - nd[i]);
    return (1.0 - s) * u[i] + s * u[i + 1];
  };
  auto slope_at = [&](double y, bool right) {
    auto it = right ? std::upper_bound(nd.begin(), nd.end(), y) : std::lower_bound(nd.begin(), nd.end(), y);
    std::size_t i = static_cast<std::size_t>(it - nd.begin());
    i = right ? i - 1 : i - 1;
    i = std::min(i, nd.size() - 2);
    return (u[i + 1] - u[i]) / (nd[i + 1] - nd[i]);
  };
  const double ux = value(x);
  const double lo = std::max(nd.front(), x - l.horizon);
  const double hi = std::min(nd.back(), x + l.horizon);
  // Symmetric core around x where u is linear on each side.
  double left = x - lo;
  double right = hi - x;
  for (double c : nd) {
    if (c < x) left = std::min(left, x - c);
    if (c > x) right = std::min(right, c - x);
  }
  const bool at_node = left <= 0.0 || right <= 0.0;
  double core = at_node ? 0.0 : std::min(left, right);
  const double sr = slope_at(x, true);
  const double sl = slope_at(x, false);
  double total = 0.0;
  if (core > 0.0) {
    Fn f = [&](double r) {
      if (r == 0.0) return 0.0;
      return r * (sr * gamma_sym(l, x, x + r) - sl * gamma_sym(l, x, x - r));
    };
    total += integrate(f, 0.0, core, {}, tol);
  }
  Fn g = [&](double y) {
    if (y == x) return 0.0;
    return (value(y) - ux) * gamma_sym(l, x, y);
  };
  std::vector<double> cuts(nd.begin(), nd.end());
  cuts.push_back(x);
  total += integrate(g, lo, x - core, cuts, tol);
  total += integrate(g, x + core, hi, cuts, tol);
  return 2.0 * total;
}

double unit_square_power(double p, double tol) {
  Fn outer = [&](double x) {
    Fn inner = [&](double y) { return y == x ? 0.0 : std::pow(std::abs(y - x), p); };
    return integrate(inner, 0.0, 1.0, {x}, tol);
  };
  return integrate(outer, 0.0, 1.0, {}, tol);
}

double integral(const std::function<double(double)>& f, double a, double b, double tol) {
  return integrate(f, a, b, {}, tol);
}

}  // namespace oracle

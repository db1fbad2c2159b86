#include <cmath>
#include <numbers>
#include <optional>

#include "doctest.h"
#include "nlv/quadrature.hpp"
#include "oracle.hpp"

using namespace nlv;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

double pair_power(const Mesh& m, int e1, int e2, double p, std::optional<double> horizon, const QuadratureOptions& o) {
  double s = 0.0;
  for (const QuadPoint& q : pair_rule(m, e1, e2, horizon, o).points) {
    const double r = distance(q.x, q.y, m.dim);
    if (horizon && r > *horizon) continue;
    s += q.w * std::pow(r, p);
  }
  return s;
}

// int_a^{a+1} int_b^{b+1} |y - x|^p for unit intervals offset by d = b - a.
double unit_pair_power(double p, double d) {
  auto f = [p](double s) { return std::pow(std::abs(s), p + 2.0) / ((p + 1.0) * (p + 2.0)); };
  return f(d + 1.0) - 2.0 * f(d) + f(d - 1.0);
}

// Elements [-1,0], [0,1], [1,2], [2,3].
Mesh unit_line() { return build_interval_mesh(0.0, 2.0, 2, 1.0); }

}  // namespace

TEST_CASE("Gauss-Legendre rules are exact to degree 2n-1") {
  for (int n : {1, 2, 4, 8, 15}) {
    const GaussRule& g = gauss_legendre(n);
    REQUIRE(g.nodes.size() == static_cast<std::size_t>(n));
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g.weights[i] * std::pow(g.nodes[i], k);
      CHECK_MESSAGE(s == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13), "n=" << n << " k=" << k);
    }
    for (int i = 0; i + 1 < n; ++i) CHECK(g.nodes[i] < g.nodes[i + 1]);
  }
  // One degree higher is not integrated exactly.
  const GaussRule& g = gauss_legendre(4);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += g.weights[i] * std::pow(g.nodes[i], 8);
  CHECK(std::abs(s - 1.0 / 9) > 1e-8);
  CHECK_THROWS(gauss_legendre(0));
}

TEST_CASE("collapsed triangle rule integrates monomials") {
  for (int n : {2, 4, 8}) {
    const TriangleRule& t = triangle_rule(n);
    for (int a = 0; a + 0 <= 2 * n - 2; ++a)
      for (int b = 0; a + b <= 2 * n - 2; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < t.weights.size(); ++q) s += t.weights[q] * std::pow(t.bary[q][1], a) * std::pow(t.bary[q][2], b);
        const double exact = 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2);
        CHECK(s == doctest::Approx(exact).epsilon(1e-12));
      }
  }
}

TEST_CASE("1-D pair rules against closed forms") {
  const Mesh m = unit_line();
  const QuadratureOptions o;
  CHECK(classify_pair(m, 1, 1) == PairKind::identical);
  CHECK(classify_pair(m, 1, 2) == PairKind::adjacent);
  CHECK(classify_pair(m, 0, 2) == PairKind::far);
  for (double p : {-0.4, 0.0, 0.3}) {
    CHECK(pair_power(m, 1, 1, p, std::nullopt, o) == doctest::Approx(unit_pair_power(p, 0.0)).epsilon(2e-5));
    CHECK(pair_power(m, 1, 2, p, std::nullopt, o) == doctest::Approx(unit_pair_power(p, 1.0)).epsilon(1e-10));
    CHECK(pair_power(m, 2, 1, p, std::nullopt, o) == doctest::Approx(unit_pair_power(p, 1.0)).epsilon(1e-10));
    CHECK(pair_power(m, 0, 2, p, std::nullopt, o) == doctest::Approx(unit_pair_power(p, 2.0)).epsilon(1e-6));
  }
  // Constant integrand: every rule is exact.
  CHECK(pair_power(m, 1, 1, 0.0, std::nullopt, o) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(unit_pair_power(-0.4, 0.0) == doctest::Approx(oracle::unit_square_power(-0.4)).epsilon(1e-10));
}

TEST_CASE("1-D horizon cut is exact") {
  const Mesh m = unit_line();
  const double p = -0.4, eps = 0.35;
  // 2 int_0^eps (1 - s) s^p ds on the diagonal element
  const double diag = 2.0 * (std::pow(eps, p + 1) / (p + 1) - std::pow(eps, p + 2) / (p + 2));
  CHECK(pair_power(m, 1, 1, p, eps, {}) == doctest::Approx(diag).epsilon(1e-4));
  // int_0^eps s * s^p ds on neighbouring elements
  const double adj = std::pow(eps, p + 2) / (p + 2);
  CHECK(pair_power(m, 1, 2, p, eps, {}) == doctest::Approx(adj).epsilon(1e-9));
  CHECK_FALSE(pair_interacts(m, 0, 3, eps));
  CHECK(pair_interacts(m, 1, 2, eps));
}

TEST_CASE("graded refinement reduces the singular error monotonically") {
  const Mesh m = unit_line();
  const double p = -0.4;
  for (auto [e1, e2, d] : {std::tuple{1, 1, 0.0}, std::tuple{1, 2, 1.0}}) {
    double prev = INFINITY;
    for (int levels : {0, 2, 4, 8, 12}) {
      QuadratureOptions o;
      o.levels = levels;
      const double err = std::abs(pair_power(m, e1, e2, p, std::nullopt, o) - unit_pair_power(p, d));
      CHECK(err <= prev);
      prev = err;
    }
    CHECK(prev < 1e-6 * unit_pair_power(p, d));
  }
}

TEST_CASE("pair rule weights sum to the product of measures") {
  const Mesh m = build_box_mesh(1.0, 1.0, 3, 3, 0.35);
  const QuadratureOptions o;
  for (int e1 : {0, 7, 20})
    for (int e2 = 0; e2 < m.num_elements(); e2 += 5) {
      const PairRule r = pair_rule(m, e1, e2, std::nullopt, o);
      double s = 0.0;
      for (const QuadPoint& q : r.points) {
        CHECK(q.w > 0.0);
        CHECK(distance(q.x, q.y, 2) > 0.0);
        s += q.w;
      }
      CHECK(s == doctest::Approx(m.measure(e1) * m.measure(e2)).epsilon(1e-12));
      CHECK(r.kind == classify_pair(m, e1, e2));
    }
}

TEST_CASE("2-D singular pair integrals converge under refinement") {
  const Mesh m = build_box_mesh(1.0, 1.0, 2, 2, 0.5);
  // diagonal-sharing neighbours 0 and 1, a vertex neighbour, and the element itself
  for (int e2 : {0, 1, 2}) {
    double prev = 0.0, prev_diff = INFINITY;
    for (int levels : {1, 2, 4, 6}) {
      QuadratureOptions o;
      o.levels_2d = levels;
      o.order_2d = 2 + levels;
      const double v = pair_power(m, 0, e2, -1.0, std::nullopt, o);
      if (levels > 1) {
        const double diff = std::abs(v - prev);
        CHECK(diff <= prev_diff * 1.01);
        prev_diff = diff;
      }
      prev = v;
    }
    CHECK(prev_diff / prev < 1e-8);
  }
}

TEST_CASE("point rules cover the domain and cancel odd parts") {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, 0.3);
  const QuadratureOptions o;
  const Point x{0.41, 0.0};
  double total = 0.0;
  for (const PointSample& s : point_rule(m, x, std::nullopt, o)) total += s.w;
  CHECK(total == doctest::Approx(1.75));

  double ball = 0.0, odd = 0.0, sing = 0.0;
  const double p = -0.3;
  for (const PointSample& s : point_rule(m, x, 0.3, o)) {
    ball += s.w;
    odd += s.w * s.d[0] * std::pow(std::abs(s.d[0]), -1.9);
    sing += s.w * std::pow(std::abs(s.d[0]), p);
    CHECK(s.d[0] != 0.0);
    CHECK(std::abs(m.map(s.elem, s.bary)[0] - s.y[0]) < 1e-12);
  }
  CHECK(ball == doctest::Approx(0.6));
  CHECK(std::abs(odd) < 1e-9);
  CHECK(sing == doctest::Approx(2.0 * std::pow(0.3, p + 1) / (p + 1)).epsilon(1e-9));

  const Mesh sq = build_box_mesh(1.0, 1.0, 4, 4, 0.3);
  double area = 0.0;
  for (const PointSample& s : point_rule(sq, {0.43, 0.57}, 0.2, o)) area += s.w;
  CHECK(area == doctest::Approx(std::numbers::pi * 0.04).epsilon(5e-4));
}

TEST_CASE("locate finds the host element") {
  const Mesh m = build_box_mesh(1.0, 1.0, 4, 4, 0.3);
  const Point x{0.31, 0.77};
  const auto hit = locate(m, x);
  REQUIRE(hit);
  const Point back = m.map(hit->first, hit->second);
  CHECK(back[0] == doctest::Approx(x[0]));
  CHECK(back[1] == doctest::Approx(x[1]));
  CHECK_FALSE(locate(m, {5.0, 5.0}));
}

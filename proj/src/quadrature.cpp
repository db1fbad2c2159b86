#include "nlv/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

namespace nlv {

namespace {

constexpr int kMaxRuleOrder = 48;

GaussRule compute_gauss(int n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // ascending nodes on [0, 1]
    r.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    r.weights[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

TriangleRule compute_triangle(int n) {
  const GaussRule& g = gauss_legendre(n);
  TriangleRule t;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = g.nodes[i];
      const double v = g.nodes[j];
      const double l1 = u;
      const double l2 = (1.0 - u) * v;
      t.bary.push_back({1.0 - l1 - l2, l1, l2});
      t.weights.push_back(2.0 * g.weights[i] * g.weights[j] * (1.0 - u));
    }
  }
  return t;
}

using Bary = std::array<double, 3>;

struct SubTri {
  std::array<Bary, 3> v;  // vertices in parent barycentrics
  double area = 0.0;      // physical area
};

Bary lerp_bary(const SubTri& t, const Bary& local) {
  Bary b{0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k)
    for (int c = 0; c < 3; ++c) b[c] += local[k] * t.v[k][c];
  return b;
}

Bary mid(const Bary& a, const Bary& b) { return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])}; }

std::array<SubTri, 4> refine(const SubTri& t) {
  const Bary& A = t.v[0];
  const Bary& B = t.v[1];
  const Bary& C = t.v[2];
  const Bary ab = mid(A, B);
  const Bary bc = mid(B, C);
  const Bary ca = mid(C, A);
  const double a = 0.25 * t.area;
  return {SubTri{{A, ab, ca}, a}, SubTri{{ab, B, bc}, a}, SubTri{{ca, bc, C}, a}, SubTri{{bc, ca, ab}, a}};
}

SubTri whole(const Mesh& m, int e) { return SubTri{{Bary{1, 0, 0}, Bary{0, 1, 0}, Bary{0, 0, 1}}, m.measure(e)}; }

Bary interval_bary(const Mesh& m, int e, double x) {
  const double v0 = m.vertex(e, 0)[0];
  const double v1 = m.vertex(e, 1)[0];
  const double s = (x - v0) / (v1 - v0);
  return {1.0 - s, s, 0.0};
}

int outer_order(const QuadratureOptions& o) { return std::min(kMaxRuleOrder, o.order + o.levels); }

// Composite Gauss on [a, b] graded geometrically toward `a` (toward_a) or `b`.
// The order drops by one per level toward the singular end (hp grading).
void graded_nodes(double a, double b, bool toward_a, const QuadratureOptions& o,
                  std::vector<std::pair<double, double>>& out) {
  const double len = b - a;
  // Keep the innermost interval well above the unit roundoff.
  const int levels = std::min(o.levels, static_cast<int>(std::log(1e-13) / std::log(o.grading)));
  double outer = 1.0;
  for (int k = 0; k <= levels; ++k) {
    const GaussRule& g = gauss_legendre(std::min(kMaxRuleOrder, o.order + levels - k));
    const double inner = k == levels ? 0.0 : outer * o.grading;
    // relative sub-interval [inner, outer] measured from the singular end
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double rel = inner + (outer - inner) * g.nodes[i];
      const double w = (outer - inner) * g.weights[i] * len;
      out.emplace_back(toward_a ? a + rel * len : b - rel * len, w);
    }
    outer = inner;
  }
}

void plain_nodes(double a, double b, int order, std::vector<std::pair<double, double>>& out) {
  const GaussRule& g = gauss_legendre(order);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) out.emplace_back(a + (b - a) * g.nodes[i], (b - a) * g.weights[i]);
}

// Composite Gauss on [a, b] with intervals doubling away from a point at
// distance `gap` outside the near end; handles near-singular integrands.
void near_graded_nodes(double a, double b, bool near_a, double gap, int order,
                       std::vector<std::pair<double, double>>& out) {
  const double len = b - a;
  if (!(gap > 0.0) || gap >= len) {
    plain_nodes(a, b, order, out);
    return;
  }
  double lo = 0.0;
  double step = gap;
  while (lo < len) {
    const double hi = std::min(len, lo + step);
    if (near_a)
      plain_nodes(a + lo, a + hi, order, out);
    else
      plain_nodes(b - hi, b - lo, order, out);
    lo = hi;
    step *= 2.0;
  }
}

PairRule pair_rule_1d(const Mesh& m, int e1, int e2, std::optional<double> horizon, const QuadratureOptions& o) {
  PairRule rule;
  rule.kind = classify_pair(m, e1, e2);
  const double x0 = std::min(m.vertex(e1, 0)[0], m.vertex(e1, 1)[0]);
  const double x1 = std::max(m.vertex(e1, 0)[0], m.vertex(e1, 1)[0]);
  const double y0 = std::min(m.vertex(e2, 0)[0], m.vertex(e2, 1)[0]);
  const double y1 = std::max(m.vertex(e2, 0)[0], m.vertex(e2, 1)[0]);
  const GaussRule& g = gauss_legendre(o.order);

  auto emit = [&](double x, double y, double w) {
    rule.points.push_back(QuadPoint{{x, 0.0}, {y, 0.0}, w, interval_bary(m, e1, x), interval_bary(m, e2, y)});
  };

  const double tol = 1e-12 * ((x1 - x0) + (y1 - y0));
  const double dmin = y0 - x1;
  const double dmax = y1 - x0;
  std::vector<double> bps{dmin, y0 - x0, y1 - x1, dmax};
  bool cut = false;
  if (horizon) {
    for (double c : {-*horizon, *horizon}) {
      if (c > dmin + tol && c < dmax - tol) {
        bps.push_back(c);
        cut = true;
      }
    }
  }

  const bool separated = dmin > std::max(x1 - x0, y1 - y0) - tol || dmax < -std::max(x1 - x0, y1 - y0) + tol;
  if (rule.kind == PairKind::far && !cut && separated) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      for (std::size_t j = 0; j < g.nodes.size(); ++j)
        emit(x0 + (x1 - x0) * g.nodes[i], y0 + (y1 - y0) * g.nodes[j],
             (x1 - x0) * (y1 - y0) * g.weights[i] * g.weights[j]);
    return rule;
  }

  const bool identical = rule.kind == PairKind::identical;
  if (identical) {
    // Only the half y > x is generated; the other half is its mirror image.
    bps = {0.0, x1 - x0};
    if (horizon && *horizon < x1 - x0 - tol) bps.push_back(*horizon);
  } else if (dmin < -tol && dmax > tol) {
    bps.push_back(0.0);
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end(), [tol](double a, double b) { return std::abs(a - b) <= tol; }),
            bps.end());

  std::vector<std::pair<double, double>> dnodes;
  for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
    const double a = bps[k];
    const double b = bps[k + 1];
    if (std::abs(a) <= tol)
      graded_nodes(0.0, b, true, o, dnodes);
    else if (std::abs(b) <= tol)
      graded_nodes(a, 0.0, false, o, dnodes);
    else
      plain_nodes(a, b, outer_order(o), dnodes);
  }

  for (const auto& [d, wd] : dnodes) {
    const double lo = std::max(x0, y0 - d);
    const double hi = std::min(x1, y1 - d);
    const double len = hi - lo;
    if (!(len > 0.0)) continue;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double x = lo + len * g.nodes[i];
      const double w = wd * len * g.weights[i];
      emit(x, x + d, w);
      if (identical) emit(x + d, x, w);
    }
  }
  return rule;
}

// Regularizing maps for touching triangle pairs on the reference triangle
// {0 <= t2 <= t1 <= 1}; each region maps (xi, e1, e2, e3) in [0,1]^4 to the
// pair (tx, ty) with Jacobian xi^3 * jac(e). The distance |x - y| carries a
// factor xi, so graded Gauss in xi resolves the singularity.
struct RefPair {
  double x1, x2, y1, y2, jac;
};

using RegionMap = RefPair (*)(double, double, double, double);

constexpr RegionMap kIdentical[] = {
    [](double x, double a, double b, double c) {
      return RefPair{x, x * (1 - a + a * b), x * (1 - a * b * c), x * (1 - a), a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x * (1 - a * b * c), x * (1 - a), x, x * (1 - a + a * b), a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x, x * a * (1 - b + b * c), x * (1 - a * b), x * a * (1 - b), a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x * (1 - a * b), x * a * (1 - b), x, x * a * (1 - b + b * c), a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x * (1 - a * b * c), x * a * (1 - b * c), x, x * a * (1 - b), a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x, x * a * (1 - b), x * (1 - a * b * c), x * a * (1 - b * c), a * a * b};
    },
};

constexpr RegionMap kCommonEdge[] = {
    [](double x, double a, double b, double c) {
      return RefPair{x, x * a * c, x * (1 - a * b), x * a * (1 - b), a * a};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x, x * a, x * (1 - a * b * c), x * a * b * (1 - c), a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x * (1 - a * b), x * a * (1 - b), x, x * a * b * c, a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x * (1 - a * b * c), x * a * b * (1 - c), x, x * a, a * a * b};
    },
    [](double x, double a, double b, double c) {
      return RefPair{x * (1 - a * b * c), x * a * (1 - b * c), x, x * a * b, a * a * b};
    },
};

constexpr RegionMap kCommonVertex[] = {
    [](double x, double a, double b, double c) { return RefPair{x, x * a, x * b, x * b * c, b}; },
    [](double x, double a, double b, double c) { return RefPair{x * b, x * b * c, x, x * a, b}; },
};

// Vertex order (A, B, C) of an element for the map A + t1 (B - A) + t2 (C - B).
using Perm = std::array<int, 3>;

Bary ref_to_bary(const Perm& p, double t1, double t2) {
  Bary b{};
  b[p[0]] = 1.0 - t1;
  b[p[1]] = t1 - t2;
  b[p[2]] = t2;
  return b;
}

PairRule pair_rule_2d(const Mesh& m, int e1, int e2, const QuadratureOptions& o) {
  PairRule rule;
  rule.kind = classify_pair(m, e1, e2);
  const Element& k1 = m.elements[e1];
  const Element& k2 = m.elements[e2];

  auto push = [&](const Bary& bx, const Bary& by, double w) {
    rule.points.push_back(QuadPoint{m.map(e1, bx), m.map(e2, by), w, bx, by});
  };

  if (rule.kind == PairKind::far) {
    const bool near = m.min_distance(e1, e2) < std::max(m.diameter(e1), m.diameter(e2));
    const TriangleRule& t = triangle_rule(near ? std::min(kMaxRuleOrder, o.order_2d + o.levels_2d) : o.order_2d);
    const double scale = m.measure(e1) * m.measure(e2);
    for (std::size_t i = 0; i < t.weights.size(); ++i)
      for (std::size_t j = 0; j < t.weights.size(); ++j) push(t.bary[i], t.bary[j], scale * t.weights[i] * t.weights[j]);
    return rule;
  }

  // Shared vertices first, in matching order.
  Perm p1{};
  Perm p2{};
  int shared = 0;
  if (rule.kind == PairKind::identical) {
    p1 = p2 = {0, 1, 2};
    shared = 3;
  } else {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (k1[i] == k2[j]) {
          p1[shared] = i;
          p2[shared] = j;
          ++shared;
        }
    int n1 = shared;
    int n2 = shared;
    for (int i = 0; i < 3; ++i) {
      if (std::find(p1.begin(), p1.begin() + shared, i) == p1.begin() + shared) p1[n1++] = i;
      if (std::find(p2.begin(), p2.begin() + shared, i) == p2.begin() + shared) p2[n2++] = i;
    }
  }

  std::span<const RegionMap> regions;
  if (shared == 3)
    regions = kIdentical;
  else if (shared == 2)
    regions = kCommonEdge;
  else
    regions = kCommonVertex;

  QuadratureOptions go = o;
  go.order = o.order_2d;
  go.levels = o.levels_2d;
  std::vector<std::pair<double, double>> xi;
  graded_nodes(0.0, 1.0, true, go, xi);
  const GaussRule& g = gauss_legendre(outer_order(go));
  const double scale = 4.0 * m.measure(e1) * m.measure(e2);

  for (RegionMap f : regions) {
    for (const auto& [x, wx] : xi) {
      const double wx3 = wx * x * x * x * scale;
      for (std::size_t a = 0; a < g.nodes.size(); ++a)
        for (std::size_t b = 0; b < g.nodes.size(); ++b)
          for (std::size_t c = 0; c < g.nodes.size(); ++c) {
            const RefPair r = f(x, g.nodes[a], g.nodes[b], g.nodes[c]);
            push(ref_to_bary(p1, r.x1, r.x2), ref_to_bary(p2, r.y1, r.y2),
                 wx3 * r.jac * g.weights[a] * g.weights[b] * g.weights[c]);
          }
    }
  }
  return rule;
}

// ---- point rules ---------------------------------------------------------

std::vector<PointSample> point_rule_1d(const Mesh& m, const Point& xp, std::optional<double> horizon,
                                       const QuadratureOptions& o) {
  const double x = xp[0];
  struct Span {
    double lo, hi;
    int e;
  };
  std::vector<Span> spans;
  spans.reserve(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) {
    const double a = m.vertex(e, 0)[0];
    const double b = m.vertex(e, 1)[0];
    spans.push_back({std::min(a, b), std::max(a, b), e});
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.lo < b.lo; });
  const double dom_lo = spans.front().lo;
  const double dom_hi = spans.back().hi;
  const double tol = 1e-12 * (dom_hi - dom_lo);

  std::vector<double> bps;
  for (const auto& s : spans) bps.push_back(s.lo);
  bps.push_back(dom_hi);
  double lo = dom_lo;
  double hi = dom_hi;
  if (horizon) {
    lo = std::max(lo, x - *horizon);
    hi = std::min(hi, x + *horizon);
  }
  bps.push_back(lo);
  bps.push_back(hi);
  if (x > lo && x < hi) bps.push_back(x);
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end(), [tol](double a, double b) { return std::abs(a - b) <= tol; }),
            bps.end());
  std::vector<double> cuts;
  for (double b : bps)
    if (b >= lo - tol && b <= hi + tol) cuts.push_back(std::clamp(b, lo, hi));

  std::vector<PointSample> out;
  auto emit_d = [&](double d, double w) {
    const double y = x + d;
    auto it = std::upper_bound(spans.begin(), spans.end(), y, [](double v, const Span& s) { return v < s.lo; });
    const Span& s = it == spans.begin() ? spans.front() : *(it - 1);
    const double ds = d / (m.vertex(s.e, 1)[0] - m.vertex(s.e, 0)[0]);
    const bool host = x >= s.lo - tol && x <= s.hi + tol;
    out.push_back(PointSample{{y, 0.0}, w, s.e, interval_bary(m, s.e, y), {d, 0.0}, {-ds, ds, 0.0}, host});
  };
  auto emit = [&](double y, double w) { emit_d(y - x, w); };

  // symmetric core around x
  double left = 0.0;
  double right = 0.0;
  for (double c : cuts) {
    if (c < x - tol) left = x - c;  // ascending: last one below x is nearest
  }
  for (auto it = cuts.rbegin(); it != cuts.rend(); ++it)
    if (*it > x + tol) right = *it - x;
  const double core = std::min(left, right);
  if (core > 0.0) {
    std::vector<std::pair<double, double>> r;
    graded_nodes(0.0, core, true, o, r);
    for (const auto& [rr, w] : r) {
      emit_d(rr, w);
      emit_d(-rr, w);
    }
  }
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double a = cuts[k];
    double b = cuts[k + 1];
    if (b - a <= tol) continue;
    // remove the core part
    if (core > 0.0) {
      if (a >= x - core - tol && b <= x + core + tol) continue;
      if (a < x - core && b > x - core) b = x - core;
      if (a < x + core && b > x + core) a = x + core;
    }
    std::vector<std::pair<double, double>> nodes;
    if (std::abs(a - x) <= tol)
      graded_nodes(a, b, true, o, nodes);
    else if (std::abs(b - x) <= tol)
      graded_nodes(a, b, false, o, nodes);
    else if (a > x)
      near_graded_nodes(a, b, true, a - x, outer_order(o), nodes);
    else
      near_graded_nodes(a, b, false, x - b, outer_order(o), nodes);
    for (const auto& [y, w] : nodes) emit(y, w);
  }
  return out;
}

struct Sector {
  double start = 0.0;  // angle in [0, 2pi)
  double span = 0.0;   // in (0, pi)
  Point a, b;          // edge endpoints
  int elem = -1;
};

double wrap_angle(double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  t = std::fmod(t, two_pi);
  if (t < 0.0) t += two_pi;
  return t;
}

// Distance from x along direction th to the line through a and b.
double ray_distance(const Point& x, double th, const Point& a, const Point& b) {
  const double ex = std::cos(th);
  const double ey = std::sin(th);
  const double ux = b[0] - a[0];
  const double uy = b[1] - a[1];
  const double den = ex * uy - ey * ux;
  return ((a[0] - x[0]) * uy - (a[1] - x[1]) * ux) / den;
}

std::vector<PointSample> point_rule_2d(const Mesh& m, const Point& x, std::optional<double> horizon,
                                       const QuadratureOptions& o) {
  std::vector<PointSample> out;
  const double btol = 1e-12;
  std::vector<char> host(m.num_elements(), 0);
  std::vector<Sector> sectors;

  auto bary_of = [&](int e, const Point& p) {
    const Point& a = m.vertex(e, 0);
    const Point& b = m.vertex(e, 1);
    const Point& c = m.vertex(e, 2);
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    const double l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    const double l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    return Bary{1.0 - l1 - l2, l1, l2};
  };

  for (int e = 0; e < m.num_elements(); ++e) {
    const Bary bc = bary_of(e, x);
    if (std::min({bc[0], bc[1], bc[2]}) < -btol) continue;
    host[e] = 1;
    for (int k = 0; k < 3; ++k) {
      // edge opposite vertex k lies on lambda_k = 0
      if (bc[k] <= btol) continue;
      const Point a = m.vertex(e, (k + 1) % 3);
      const Point b = m.vertex(e, (k + 2) % 3);
      double ta = wrap_angle(std::atan2(a[1] - x[1], a[0] - x[0]));
      double tb = wrap_angle(std::atan2(b[1] - x[1], b[0] - x[0]));
      double span = wrap_angle(tb - ta);
      if (span > std::numbers::pi) {
        std::swap(ta, tb);
        span = wrap_angle(tb - ta);
      }
      sectors.push_back(Sector{ta, span, a, b, e});
    }
  }

  // Host elements in polar coordinates around x, directions paired with
  // their opposites.
  std::vector<double> bps{0.0, std::numbers::pi};
  for (const auto& s : sectors) {
    for (double t : {s.start, s.start + s.span}) {
      const double u = std::fmod(wrap_angle(t), std::numbers::pi);
      bps.push_back(u);
    }
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end(), [](double a, double b) { return std::abs(a - b) <= 1e-13; }),
            bps.end());

  auto find_sector = [&](double th) -> const Sector* {
    th = wrap_angle(th);
    for (const auto& s : sectors) {
      const double rel = wrap_angle(th - s.start);
      if (rel <= s.span) return &s;
    }
    return nullptr;
  };
  auto dbary_of = [&](int e, const Point& d) {
    const Point& a = m.vertex(e, 0);
    const Point& b = m.vertex(e, 1);
    const Point& c = m.vertex(e, 2);
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    const double l1 = (d[0] * (c[1] - a[1]) - (c[0] - a[0]) * d[1]) / det;
    const double l2 = ((b[0] - a[0]) * d[1] - d[0] * (b[1] - a[1])) / det;
    return Bary{-l1 - l2, l1, l2};
  };
  auto emit = [&](int e, double r, double th, double w) {
    const Point d{r * std::cos(th), r * std::sin(th)};
    const Point y{x[0] + d[0], x[1] + d[1]};
    out.push_back(PointSample{y, w, e, bary_of(e, y), d, dbary_of(e, d), true});
  };

  const double cap = horizon ? *horizon : std::numeric_limits<double>::infinity();
  auto radius = [&](const Sector* s, double th) { return s ? std::min(cap, ray_distance(x, th, s->a, s->b)) : 0.0; };

  // Angular pieces are bisected until the radial extent is nearly uniform,
  // which keeps the angular integrand smooth when x is close to an edge.
  std::vector<std::pair<double, double>> pieces;
  std::function<void(double, double, int)> split = [&](double t0, double t1, int depth) {
    const double tm = 0.5 * (t0 + t1);
    double ratio = 1.0;
    for (double off : {0.0, std::numbers::pi}) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      for (double th : {t0 + 1e-9 * (t1 - t0), tm, t1 - 1e-9 * (t1 - t0)}) {
        const Sector* s = find_sector(th + off);
        if (!s) continue;
        const double r = radius(s, th + off);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      if (hi > 0.0) ratio = std::max(ratio, hi / lo);
    }
    if (depth < 12 && ratio > 1.5) {
      split(t0, tm, depth + 1);
      split(tm, t1, depth + 1);
    } else {
      pieces.emplace_back(t0, t1);
    }
  };
  for (std::size_t k = 0; k + 1 < bps.size(); ++k)
    if (bps[k + 1] - bps[k] > 1e-13) split(bps[k], bps[k + 1], 0);

  const GaussRule& gth = gauss_legendre(std::min(kMaxRuleOrder, 2 * o.order));
  for (const auto& [t0, t1] : pieces) {
    for (std::size_t i = 0; i < gth.nodes.size(); ++i) {
      const double th = t0 + (t1 - t0) * gth.nodes[i];
      const double wth = (t1 - t0) * gth.weights[i];
      const Sector* s1 = find_sector(th);
      const Sector* s2 = find_sector(th + std::numbers::pi);
      const double r1 = radius(s1, th);
      const double r2 = radius(s2, th + std::numbers::pi);
      const double core = std::min(r1, r2);
      std::vector<std::pair<double, double>> rn;
      if (core > 0.0) {
        graded_nodes(0.0, core, true, o, rn);
        for (const auto& [r, w] : rn) {
          emit(s1->elem, r, th, wth * w * r);
          emit(s2->elem, r, th + std::numbers::pi, wth * w * r);
        }
      }
      for (int side = 0; side < 2; ++side) {
        const Sector* s = side == 0 ? s1 : s2;
        const double rmax = side == 0 ? r1 : r2;
        if (!s || rmax <= core) continue;
        rn.clear();
        if (core > 0.0)
          near_graded_nodes(core, rmax, true, core, outer_order(o), rn);
        else
          graded_nodes(0.0, rmax, true, o, rn);
        const double dir = side == 0 ? th : th + std::numbers::pi;
        for (const auto& [r, w] : rn) emit(s->elem, r, dir, wth * w * r);
      }
    }
  }

  // Remaining elements: Gauss, subdivided when close to x.
  const TriangleRule& tr = triangle_rule(o.order_2d);
  std::function<void(int, const SubTri&, int)> visit = [&](int e, const SubTri& t, int level) {
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    double diam = 0.0;
    std::array<Point, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = m.map(e, t.v[k]);
    for (int k = 0; k < 3; ++k) {
      dmax = std::max(dmax, distance(x, p[k], 2));
      diam = std::max(diam, distance(p[k], p[(k + 1) % 3], 2));
      const double ux = p[(k + 1) % 3][0] - p[k][0];
      const double uy = p[(k + 1) % 3][1] - p[k][1];
      const double len2 = ux * ux + uy * uy;
      const double s = std::clamp(((x[0] - p[k][0]) * ux + (x[1] - p[k][1]) * uy) / len2, 0.0, 1.0);
      dmin = std::min(dmin, std::hypot(x[0] - p[k][0] - s * ux, x[1] - p[k][1] - s * uy));
    }
    if (dmin > cap) return;
    const bool straddles = dmin < cap && dmax > cap;
    if ((dmin < diam || straddles) && level < 2 * o.levels_2d + 2) {
      for (const auto& c : refine(t)) visit(e, c, level + 1);
      return;
    }
    for (std::size_t q = 0; q < tr.weights.size(); ++q) {
      const Bary b = lerp_bary(t, tr.bary[q]);
      const Point y = m.map(e, b);
      if (horizon && distance(x, y, 2) > *horizon) continue;
      const Point d{y[0] - x[0], y[1] - x[1]};
      out.push_back(PointSample{y, t.area * tr.weights[q], e, b, d, dbary_of(e, d), false});
    }
  };
  for (int e = 0; e < m.num_elements(); ++e)
    if (!host[e]) visit(e, whole(m, e), 0);
  return out;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static const std::vector<GaussRule> rules = [] {
    std::vector<GaussRule> r(kMaxRuleOrder + 1);
    for (int k = 1; k <= kMaxRuleOrder; ++k) r[k] = compute_gauss(k);
    return r;
  }();
  if (n < 1 || n > kMaxRuleOrder) throw std::invalid_argument("gauss_legendre: unsupported order");
  return rules[n];
}

const TriangleRule& triangle_rule(int n) {
  static const std::vector<TriangleRule> rules = [] {
    std::vector<TriangleRule> r(kMaxRuleOrder + 1);
    for (int k = 1; k <= kMaxRuleOrder; ++k) r[k] = compute_triangle(k);
    return r;
  }();
  if (n < 1 || n > kMaxRuleOrder) throw std::invalid_argument("triangle_rule: unsupported order");
  return rules[n];
}

PairKind classify_pair(const Mesh& mesh, int e1, int e2) {
  if (e1 == e2) return PairKind::identical;
  return mesh.shares_vertex(e1, e2) ? PairKind::adjacent : PairKind::far;
}

bool pair_interacts(const Mesh& mesh, int e1, int e2, std::optional<double> horizon) {
  if (!horizon) return true;
  return mesh.min_distance(e1, e2) <= *horizon;
}

PairRule pair_rule(const Mesh& mesh, int e1, int e2, std::optional<double> horizon, const QuadratureOptions& opts) {
  if (opts.order < 1 || opts.levels < 0 || !(opts.grading > 0.0 && opts.grading < 1.0)) {
    throw std::invalid_argument("pair_rule: invalid quadrature options");
  }
  if (mesh.dim == 1) return pair_rule_1d(mesh, e1, e2, horizon, opts);
  return pair_rule_2d(mesh, e1, e2, opts);
}

std::vector<PointSample> point_rule(const Mesh& mesh, const Point& x, std::optional<double> horizon,
                                    const QuadratureOptions& opts) {
  // Pointwise integrands are one order more singular than the assembled
  // ones, so the radial grading goes deeper.
  QuadratureOptions o = opts;
  o.levels = std::min(kMaxRuleOrder - o.order, 3 * opts.levels);
  if (mesh.dim == 1) return point_rule_1d(mesh, x, horizon, o);
  return point_rule_2d(mesh, x, horizon, o);
}

std::optional<std::pair<int, std::array<double, 3>>> locate(const Mesh& mesh, const Point& x) {
  const double tol = 1e-12;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.dim == 1) {
      const double a = mesh.vertex(e, 0)[0];
      const double b = mesh.vertex(e, 1)[0];
      const double s = (x[0] - a) / (b - a);
      if (s >= -tol && s <= 1.0 + tol) return std::make_pair(e, Bary{1.0 - s, s, 0.0});
    } else {
      const Point& a = mesh.vertex(e, 0);
      const Point& b = mesh.vertex(e, 1);
      const Point& c = mesh.vertex(e, 2);
      const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
      const double l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
      const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
      const double l0 = 1.0 - l1 - l2;
      if (std::min({l0, l1, l2}) >= -tol) return std::make_pair(e, Bary{l0, l1, l2});
    }
  }
  return std::nullopt;
}

}  // namespace nlv

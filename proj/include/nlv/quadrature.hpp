#pragma once
// Quadrature for the singular two-point integrands of the nonlocal forms:
// element-pair rules for double integrals over K x K' and point rules for
// integrals over y at a fixed x.

#include <array>
#include <optional>
#include <vector>

#include "nlv/mesh.hpp"

namespace nlv {

/// Gauss-Legendre rule on [0, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

/// Collapsed (Duffy) Gauss rule on the reference triangle; weights sum to 1.
struct TriangleRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
};
const TriangleRule& triangle_rule(int n);

struct QuadratureOptions {
  int order = 4;          // Gauss points per direction; graded levels add one per level
  int levels = 8;         // geometric grading levels toward the singularity
  double grading = 0.15;  // ratio of successive graded intervals
  int order_2d = 3;       // Gauss order per direction in 2-D
  int levels_2d = 2;      // grading levels of the radial variable for touching 2-D pairs
};

struct QuadPoint {
  Point x;
  Point y;
  double w = 0.0;
  std::array<double, 3> bx{};  // barycentrics of x in the first element
  std::array<double, 3> by{};  // barycentrics of y in the second element
};

enum class PairKind { far, adjacent, identical };

struct PairRule {
  std::vector<QuadPoint> points;
  PairKind kind = PairKind::far;
};

/// Rule for the ordered pair (e1, e2). Weights are positive and sum to
/// |K1||K2|; no point has x == y. In 1-D the pair is split along the lines
/// y - x = 0 and y - x = +-horizon so the horizon indicator is exact at the
/// quadrature points; in 2-D touching pairs use Duffy-type regularizing maps
/// and the indicator is applied at the points.
PairRule pair_rule(const Mesh& mesh, int e1, int e2, std::optional<double> horizon, const QuadratureOptions& opts);

PairKind classify_pair(const Mesh& mesh, int e1, int e2);

/// True unless the two elements are separated by more than the horizon.
bool pair_interacts(const Mesh& mesh, int e1, int e2, std::optional<double> horizon);

struct PointSample {
  Point y;
  double w = 0.0;
  int elem = -1;
  std::array<double, 3> bary{};
  Point d{};                      // y - x as constructed (exact near x)
  std::array<double, 3> dbary{};  // bary(y) - bary(x) on elem
  bool host = false;              // x lies in elem
};

/// Samples for integrating y over the meshed domain (clipped to the horizon
/// ball when given) at fixed x. Points around x come in mirrored pairs with
/// equal weights, so odd singular parts cancel as a principal value.
std::vector<PointSample> point_rule(const Mesh& mesh, const Point& x, std::optional<double> horizon,
                                    const QuadratureOptions& opts);

/// Element containing x and its barycentric coordinates (first match).
std::optional<std::pair<int, std::array<double, 3>>> locate(const Mesh& mesh, const Point& x);

}  // namespace nlv

#pragma once
// Nonlocal operators on P1 fields: divergence D, adjoint D*, interaction
// operator N, the assembled bilinear form B, and residuals of the Gauss and
// Green identities evaluated on the discrete pair measure.

#include <Eigen/Sparse>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "nlv/kernel.hpp"
#include "nlv/mesh.hpp"
#include "nlv/quadrature.hpp"

namespace nlv {

/// Nodal coefficients of a continuous piecewise-linear function.
using Field = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Bary = std::array<double, 3>;

/// nu(x, y); vector valued, only the first component is used in 1-D.
using TwoPointField = std::function<Vec2(const Point&, const Point&)>;
/// Symmetric scalar kernel k(x, y) = k(y, x).
using PairKernel = std::function<double(const Point&, const Point&)>;

double interpolate(const Mesh& mesh, const Field& u, int elem, const Bary& bary);
/// u(x) with x located in the mesh; throws std::out_of_range outside it.
double evaluate(const Mesh& mesh, const Field& u, const Point& x);

/// Element pairs (e1 <= e2) that are not separated by more than the horizon.
std::vector<std::pair<int, int>> interacting_pairs(const Mesh& mesh, std::optional<double> horizon);

/// One quadrature point of the symmetric discrete measure on the pair set:
/// every point appears with both orientations.
struct PairSample {
  Point x;
  Point y;
  double w = 0.0;
  int ex = -1;
  int ey = -1;
  Bary bx{};
  Bary by{};
};

/// Sums `count` quantities over the pair measure. `body` adds the
/// contribution of one sample to acc[0..count). Reduction order is fixed in
/// deterministic mode.
std::vector<double> reduce_pairs(const Mesh& mesh, std::optional<double> horizon, const QuadratureOptions& opts,
                                 int count, const std::function<void(const PairSample&, double*)>& body);

/// K[i][j] = sum over ordered element pairs of
/// int int (phi_i(y) - phi_i(x)) (phi_j(y) - phi_j(x)) k(x,y) dy dx.
SparseMatrix assemble_pair_form(const Mesh& mesh, const PairKernel& k, std::optional<double> horizon,
                                const QuadratureOptions& opts);

/// P1 mass matrix over the whole mesh or the elements of one region.
SparseMatrix assemble_mass(const Mesh& mesh, std::optional<Region> region = std::nullopt);

struct StiffnessOperator {
  SparseMatrix matrix;
  double time_stamp = 0.0;
};

/// B(u,v) = int int (u(y)-u(x)) (v(y)-v(x)) gamma_sym(t,x,y) dy dx = v^T A u.
StiffnessOperator assemble_stiffness(double t, const KernelSpec& spec, const Mesh& mesh,
                                     const QuadratureOptions& opts = {});

/// Stiffness matrices at arbitrary times. Assembles once for tensors that are
/// constant or separable in time; otherwise reassembles on a time change.
class StiffnessCache {
 public:
  StiffnessCache(KernelSpec spec, const Mesh& mesh, QuadratureOptions opts = {});
  const SparseMatrix& at(double t);
  const SparseMatrix& mass() const { return mass_; }
  const KernelSpec& spec() const { return spec_; }
  const Mesh& mesh() const { return *mesh_; }
  const QuadratureOptions& options() const { return opts_; }

 private:
  KernelSpec spec_;
  const Mesh* mesh_;
  QuadratureOptions opts_;
  SparseMatrix mass_;
  SparseMatrix base_;
  SparseMatrix current_;
  std::optional<double> current_t_;
  bool has_base_ = false;
};

/// -(u(y) - u(x)) alpha(x, y); throws std::domain_error when x == y.
Vec2 apply_adjoint(const Mesh& mesh, const Field& u, const Point& x, const Point& y, const KernelSpec& spec);

/// D(nu)(x) = int (nu(x,y) + nu(y,x)) . alpha(x,y) dy. In symmetrized mode
/// alpha is replaced by its antisymmetric part.
double apply_divergence(const TwoPointField& nu, const Point& x, const KernelSpec& spec, const Mesh& mesh,
                        const QuadratureOptions& opts = {});

/// D(a D* u)(x) = -2 int (u(y) - u(x)) gamma_sym(t,x,y) dy at a point (principal value).
double diffusion_at(const Field& u, double t, const Point& x, const KernelSpec& spec, const Mesh& mesh,
                    const QuadratureOptions& opts = {});

/// N(a D* u)(x) for x in the interaction layer.
double apply_interaction(const Field& u, double t, const Point& x, const KernelSpec& spec, const Mesh& mesh,
                         const QuadratureOptions& opts = {});

/// Nodal field w with M w = A(t) u: the L2 projection of D(a D* u) onto P1.
Field apply_diffusion(const Field& u, double t, const KernelSpec& spec, const Mesh& mesh,
                      const QuadratureOptions& opts = {});

/// Repeated projections sharing one factorization of M.
class DiffusionOperator {
 public:
  explicit DiffusionOperator(StiffnessCache& cache);
  Field apply(const Field& u, double t);

 private:
  StiffnessCache* cache_;
  struct Solver;
  std::shared_ptr<Solver> solver_;
};

struct GaussResidual {
  double divergence = 0.0;  // int_Omega D(nu)
  double flux = 0.0;        // int_{Omega_I} N(nu)
  double residual = 0.0;    // |divergence - flux|
};

GaussResidual gauss_residual(const TwoPointField& nu, const KernelSpec& spec, const Mesh& mesh,
                             const QuadratureOptions& opts = {});

/// nu = a D* u at time t, built with the same alpha as apply_divergence.
TwoPointField flux_field(const Field& u, double t, const KernelSpec& spec, const Mesh& mesh);

struct GreenResidual {
  double volume = 0.0;    // int_Omega v D(a D* u)
  double form = 0.0;      // B(u, v) over Omega~ x Omega~
  double flux = 0.0;      // int_{Omega_I} v N(a D* u)
  double residual = 0.0;  // |volume - form - flux|
  double scale = 0.0;     // largest of the three magnitudes
};

GreenResidual green_residual(const Field& u, const Field& v, double t, const KernelSpec& spec, const Mesh& mesh,
                             const QuadratureOptions& opts = {});

/// Coordinate-format text: "row,col,value" per nonzero, 17 significant digits.
void write_coo(const SparseMatrix& a, const std::filesystem::path& path);

}  // namespace nlv

#pragma once
// Time stepping of the volume-constrained parabolic problem
//   M (u^{k+1} - u^k) / dt + A(t_theta) u^theta = M f(t_theta)
// with Dirichlet elimination or a zero-mean multiplier (Neumann).

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlv/spaces.hpp"

namespace nlv {

enum class Scheme { implicit_euler, crank_nicolson };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct TimeGrid {
  double T = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double final_time, int step_count);
  double dt() const { return T / steps; }
  double time(int k) const { return T * k / steps; }
  int count() const { return steps + 1; }
};

/// Nodal values of f at time t. An empty function stands for f = 0.
using Source = std::function<Field(double)>;

/// Piecewise-linear in time through values given at the grid times.
Source sampled_source(std::vector<Field> values, const TimeGrid& grid);

struct Trajectory {
  TimeGrid grid;
  Constraint kind = Constraint::dirichlet;
  std::vector<Field> snapshots;  // grid.count() entries

  const Field& at(int k) const { return snapshots.at(k); }
  const Field& final() const { return snapshots.back(); }
};

struct SolverOptions {
  Scheme scheme = Scheme::implicit_euler;
  /// Use A(0) at every step even when the tensor depends on time.
  bool freeze_operator = false;
  /// Region of the source pairing; Omega~ when unset.
  std::optional<Region> source_region;
  /// Relative tolerance on the constraint of u0.
  double constraint_tol = 1e-10;
  /// Relative residual of the iterative fallback.
  double cg_tol = 1e-10;
};

/// Step maps of one (constraint, grid, scheme) setup. The factorization is
/// kept between calls, so repeated solves on the same setup are cheap.
class Propagator {
 public:
  Propagator(StiffnessCache& cache, Constraint kind, const TimeGrid& grid, const SolverOptions& opts = {});
  ~Propagator();
  Propagator(Propagator&&) noexcept;
  Propagator& operator=(Propagator&&) noexcept;

  const TimeGrid& grid() const;
  Constraint kind() const;
  StiffnessCache& cache() const;

  /// Full trajectory; checks u0 against the constraint.
  Trajectory run(const Field& u0, const Source& f);
  /// Homogeneous solution after `steps` steps, u0 projected first.
  Field advance(const Field& u0, int steps);
  /// Adjoint of `advance` in the mass inner product.
  Field advance_adjoint(const Field& v, int steps);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Throws std::invalid_argument when u0 violates the constraint and
/// std::runtime_error when a step matrix cannot be solved.
Trajectory solve_forward(const Field& u0, const Source& f, Constraint kind, const TimeGrid& grid,
                         StiffnessCache& cache, const SolverOptions& opts = {});
Trajectory solve_forward(const Field& u0, const Source& f, Constraint kind, const TimeGrid& grid,
                         const KernelSpec& spec, const Mesh& mesh, const SolverOptions& opts = {},
                         const QuadratureOptions& quad = {});

/// Zeroes the Dirichlet nodes or removes the mean, so the field is admissible.
Field project_constraint(const Field& u, Constraint kind, const Mesh& mesh, const SparseMatrix& mass);

/// Second-order difference in time: central inside, one-sided at the ends.
/// Throws std::invalid_argument for fewer than 3 grid times.
std::vector<Field> time_derivative(const std::vector<Field>& u, const TimeGrid& grid);

/// f(t_k) = du/dt(t_k) + D(a D* u(t_k)).
std::vector<Field> manufactured_rhs(const std::vector<Field>& u_exact, const TimeGrid& grid,
                                    DiffusionOperator& op);
std::vector<Field> manufactured_rhs(const std::vector<Field>& u_exact, const TimeGrid& grid,
                                    const KernelSpec& spec, const Mesh& mesh, const QuadratureOptions& quad = {});

struct RegularityReport {
  double sup_norm = 0.0;     // sup_k ||u(t_k)||_{H^beta(.)}
  double dt_norm = 0.0;      // ||du/dt||_{L2(0,T;L2(Omega))}
  double strong_norm = 0.0;  // ||D(a D* u)||_{L2(0,T;L2(Omega))}
  double lhs = 0.0;
  double source_norm = 0.0;  // ||f||_{L2(0,T;L2(Omega~))}
  double initial_norm = 0.0; // ||u0||_{H^beta(.)}
  double rhs = 0.0;
  double ratio = 0.0;        // lhs / rhs, 0 for zero data
  bool inconsistent = false; // rhs = 0 with lhs > 0
};

RegularityReport regularity_monitor(const Trajectory& traj, const Source& f, StiffnessCache& cache);

/// Per-step summary: time, L2 norm, energy (u^T A u / 2), constraint value.
void write_trajectory_report(const Trajectory& traj, StiffnessCache& cache, const std::filesystem::path& path);

/// "time,node,value" rows in time-major order.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

/// Binary layout, little-endian: magic "NLVTRAJ1", uint32 constraint
/// (0 dirichlet, 1 neumann), uint32 zero, uint64 nodes, uint64 steps,
/// float64 T, then (steps + 1) * nodes float64 values in time-major order.
void write_trajectory_binary(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_binary(const std::filesystem::path& path);

}  // namespace nlv

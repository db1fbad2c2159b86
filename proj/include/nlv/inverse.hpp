#pragma once
// Backward diffusion by Tikhonov-regularized least squares, the Hoelder-type
// stability audit, and the linear inverse-source experiment.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlv/solver.hpp"

namespace nlv {

struct BackwardProblem {
  Field observed_T;
  double target_time = 0.0;
  double regularization = 1e-4;
  double noise_level = 0.0;  // recorded only; noise is added by the caller
};

struct BackwardOptions {
  Scheme scheme = Scheme::implicit_euler;
  int max_iterations = 2000;
  double cg_tol = 1e-10;
};

struct BackwardResult {
  Field initial;    // minimizer u0
  Field at_target;  // S_{t0}(u0)
  int iterations = 0;
  std::vector<double> residual_history;  // relative, in the mass norm
  double misfit = 0.0;                   // ||S_T(u0) - observed_T||_{L2}
  double penalty = 0.0;                  // ||u0||_{L2}
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Minimizes ||S_T u0 - d||^2 + rho ||u0||^2 over Dirichlet-admissible u0 by
/// conjugate gradients in the mass inner product. The target time must lie
/// on the grid. Throws ConvergenceError when the iteration cap is reached.
BackwardResult backward_reconstruct(const BackwardProblem& p, StiffnessCache& cache, const TimeGrid& grid,
                                    const BackwardOptions& opts = {});

/// Additive Gaussian noise with standard deviation level * ||v||_inf.
Field add_noise(const Field& v, double level, std::uint64_t seed);

struct StabilityRow {
  double x = 0.0;  // ||u(t0)||_{L2(Omega)}
  double y = 0.0;  // ||u||_{L2(Omega~ x (0,T))}
  double z = 0.0;  // ||u(T)||_{H^beta(.)(Omega~)}
  double slack = 0.0;  // log(C Y^{1-theta} Z^theta) - log X
  double log_rate = 0.0;  // Y sqrt(log(1/Z)), NaN when Z >= 1
};

struct StabilityAudit {
  double theta = 0.0;
  double constant = 0.0;  // smallest C with zero violations at the fitted theta
  double fit_constant = 0.0;  // least-squares intercept, exponentiated
  double fit_residual = 0.0;  // rms of the log regression
  std::vector<StabilityRow> rows;
  int violations = 0;
  double max_log_rate = 0.0;
};

/// Members must be homogeneous solutions on one grid. Throws
/// std::invalid_argument for a degenerate family (all members proportional,
/// or fewer than two).
StabilityAudit stability_audit(const std::vector<Trajectory>& family, double t0, StiffnessCache& cache);

/// Closed-form homogeneous solutions e^{-mu_k t} phi_k from the generalized
/// eigenpairs (A, M) on the Dirichlet-free nodes, phi_k normalized in L2.
/// Takes the first `count` modes with mu_k T >= min_decay.
std::vector<Trajectory> eigenmode_family(StiffnessCache& cache, const TimeGrid& grid, int count,
                                         double min_decay = 5.0);

void write_stability_csv(const StabilityAudit& audit, const std::filesystem::path& path);

using SpaceTimeSource = std::function<double(const Point&, double)>;

struct SourceProblem {
  double length = 1.0;  // Omega = (0, length) x (0, width)
  double width = 1.0;
  double window = 0.5;  // observation interval (0, window)
  std::vector<SpaceTimeSource> basis;
  std::vector<std::string> labels;
};

/// psi_a(x2) chi_b(t) with psi_a = cos(a pi x2 / width), a < space_modes, and
/// chi_b = cos(b pi t / window), b < time_modes.
SourceProblem separable_source_basis(double length, double width, double window, int space_modes,
                                     int time_modes);

struct SourceMap {
  Eigen::MatrixXd g;               // rows: (step, trace node), columns: basis
  std::vector<int> trace_nodes;    // interaction nodes
  std::vector<int> trace_steps;    // grid steps 1..N
  Eigen::MatrixXd u, v;            // thin SVD factors
  Eigen::VectorXd singular_values;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double condition = 0.0;
  int rank = 0;
  double horizon = 0.0;            // stands in for an infinite horizon
};

/// Solves the zero-mean problem with u(0) = 0 and the source paired over
/// Omega for every basis member and records u on the interaction nodes at
/// each grid step. Requires dim 2, constant order, identity tensor, a
/// horizon covering the whole mesh and grid.T equal to the window.
SourceMap source_forward_map(const SourceProblem& p, const TimeGrid& grid, StiffnessCache& cache,
                             Scheme scheme = Scheme::implicit_euler);

struct SourceFit {
  Eigen::VectorXd coefficients;
  double residual = 0.0;  // ||G c - data|| / ||data||, 0 for zero data
  int truncation = 0;
};

/// Truncated-SVD pseudo-inverse. Throws std::invalid_argument when the
/// truncation is below 1 or above the numerical rank.
SourceFit source_reconstruct(const Eigen::VectorXd& data, const SourceMap& map, int truncation);

void write_source_map_csv(const SourceMap& map, const std::filesystem::path& path);

}  // namespace nlv

#pragma once
// Terms of the weighted (Carleman) energy inequalities on discrete
// trajectories, with phi(t) = exp(sign * lambda * t), and an empirical
// certification of a uniform constant over (lambda, s) grids.

#include <filesystem>
#include <string>
#include <vector>

#include "nlv/solver.hpp"

namespace nlv {

struct CarlemanWeight {
  double lambda = 1.0;
  double s = 1.0;
  int sign = 1;

  CarlemanWeight() = default;
  CarlemanWeight(double lambda, double s, int sign);
};

double weight_eval(const CarlemanWeight& w, double t);

/// forward: phi = e^{lambda t}, boundary data at t = 0 and t = T.
/// terminal: phi = e^{-lambda t}, requires u(T) = 0, adds the interaction term.
enum class CarlemanVariant { forward, terminal };

std::string to_string(CarlemanVariant v);
CarlemanVariant carleman_variant_from_string(const std::string& s);

/// Spatial integrals of one trajectory at every grid time. They do not depend
/// on (lambda, s), so one profile serves a whole certification grid.
struct CarlemanProfile {
  TimeGrid grid;
  CarlemanVariant variant = CarlemanVariant::forward;
  std::vector<double> dt_sq;        // ||du/dt||^2 over Omega
  std::vector<double> diff_sq;      // ||D(a D* u)||^2 over Omega
  std::vector<double> l2_sq;        // ||u||^2 over Omega
  std::vector<double> semi_sq;      // |u|^2_{H^beta(.)} over Omega~ x Omega~
  std::vector<double> residual_sq;  // ||f||^2 over Omega~, with L(u) = f
  std::vector<double> interaction;  // int_{Omega_I} (|u| + |du/dt|) |N(a D* u)|
  double boundary = 0.0;            // ||u(T)||^2_H + ||u(0)||^2_H, or ||u(0)||^2_H
  double source_gap = 0.0;          // ||L_h(u) - f||_{L2(Q)} of the discrete trajectory
};

/// Throws std::invalid_argument when the variant's precondition fails beyond
/// `tol` relative to the largest snapshot.
CarlemanProfile carleman_profile(const Trajectory& traj, const Source& f, CarlemanVariant variant,
                                 StiffnessCache& cache, double tol = 1e-10);

/// Weighted integrals are stored divided by exp(log_scale), with log_scale the
/// largest exponent 2 s phi(t_k); rhs_boundary is unweighted.
struct CarlemanReport {
  CarlemanWeight weight;
  double log_scale = 0.0;
  double lhs_dt = 0.0;
  double lhs_diff = 0.0;
  double lhs_l2 = 0.0;
  double lhs_semi = 0.0;
  double rhs_source = 0.0;
  double rhs_interaction = 0.0;  // terminal variant only
  double rhs_boundary = 0.0;

  double lhs() const { return lhs_dt + lhs_diff + lhs_l2 + lhs_semi; }
  /// LHS / (source + interaction + e^{K s} boundary); 0/0 is 0.
  double ratio(double k) const;
  double log_ratio(double k) const;
};

CarlemanReport carleman_terms(const CarlemanProfile& p, const CarlemanWeight& w);
CarlemanReport carleman_terms(const Trajectory& traj, const Source& f, const CarlemanWeight& w,
                              CarlemanVariant variant, StiffnessCache& cache);

struct CertifyOptions {
  std::vector<double> lambdas{2.0, 4.0, 8.0};
  std::vector<double> ss{1.0, 2.0, 4.0, 8.0};
  /// Largest max/min spread of C(lambda, .) over s >= s0 inside the region.
  double stability_limit = 2.0;
  /// Fewest s values an admissible region must span.
  int min_s_points = 2;
};

struct CertificateRow {
  int lambda_index = 0;
  int s_index = 0;
  int member = 0;
  CarlemanReport report;
  double ratio = 0.0;
};

struct Certificate {
  bool certified = false;
  int lambda0 = -1;              // grid indices of the admissible corner
  int s0 = -1;
  double constant = 0.0;         // max ratio over the admissible region
  std::vector<double> k;         // fitted exponent per lambda
  std::vector<std::vector<double>> c_grid;  // max over members, [lambda][s]
  double stability = 0.0;        // max over region rows of max/min of C over s
  double top_half_stability = 0.0;  // same over the upper half of the s grid, all lambdas
  std::vector<CertificateRow> rows;
  std::string message;
};

Certificate certify(const std::vector<CarlemanProfile>& suite, const CertifyOptions& opts = {});

/// One row per (lambda, s, member) with every term and the ratio.
void write_certificate_csv(const Certificate& cert, const CertifyOptions& opts, const std::filesystem::path& path);
/// Summary block: lambda0, s0, C, K and stability figures.
std::string certificate_summary(const Certificate& cert, const CertifyOptions& opts);

}  // namespace nlv

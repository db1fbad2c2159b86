#pragma once
// Variable-order Sobolev seminorms, the nonlocal energy norm, volume
// constraints, and empirical audits of the embedding and Poincare
// inequalities.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nlv/calculus.hpp"

namespace nlv {

enum class Constraint { dirichlet, neumann };

std::string to_string(Constraint c);
Constraint constraint_from_string(const std::string& s);

/// S with u^T S u = int int (u(y)-u(x))^2 |y-x|^{-n-2 beta(x)} dy dx over
/// Omega~ x Omega~ (no horizon).
SparseMatrix assemble_seminorm(const OrderField& order, const Mesh& mesh, const QuadratureOptions& opts = {});

double variable_seminorm(const Field& u, const OrderField& order, const Mesh& mesh,
                         const QuadratureOptions& opts = {});

/// (B(u,u) / 2)^{1/2}
double energy_norm(const Field& u, double t, const KernelSpec& spec, const Mesh& mesh,
                   const QuadratureOptions& opts = {});

/// Dirichlet: int_{Omega_I} u^2. Neumann: (int_{Omega~} u)^2.
double constraint_value(const Field& u, Constraint kind, const Mesh& mesh);

struct NormReport {
  double seminorm_var = 0.0;
  double seminorm_lo = 0.0;
  double seminorm_hi = 0.0;
  double l2 = 0.0;
  double energy = 0.0;
  double constraint_value = 0.0;
};

/// Matrices shared by repeated norm evaluations on one mesh.
class NormContext {
 public:
  NormContext(const KernelSpec& spec, const Mesh& mesh, double t = 0.0, const QuadratureOptions& opts = {});

  NormReport report(const Field& u, Constraint kind) const;
  /// sqrt(||u||^2 + |u|^2) for the variable, lower and upper orders.
  double full_var(const Field& u) const;
  double full_lo(const Field& u) const;
  double full_hi(const Field& u) const;

  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& mass_omega() const { return mass_omega_; }
  const SparseMatrix& mass_layer() const { return mass_layer_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SparseMatrix& seminorm_var() const { return s_var_; }
  const KernelSpec& spec() const { return spec_; }
  const Mesh& mesh() const { return *mesh_; }

 private:
  KernelSpec spec_;
  const Mesh* mesh_;
  SparseMatrix mass_, mass_omega_, mass_layer_, stiffness_, s_var_, s_lo_, s_hi_;
};

/// Random test fields: smooth sine sums, rough nodal noise and localized
/// bumps, in rotation. With a constraint the fields satisfy it exactly.
std::vector<Field> sample_fields(const Mesh& mesh, int count, std::uint64_t seed,
                                 std::optional<Constraint> constraint = std::nullopt);

struct EmbeddingRow {
  NormReport norms;
  double ratio_lo_var = 0.0;  // ||u||_{H^beta_*} / ||u||_{H^beta(.)}
  double ratio_var_hi = 0.0;  // ||u||_{H^beta(.)} / ||u||_{H^beta^*}
  double c_ii = 0.0;          // (|u|^2 - |||u|||^2 / a_*) / (eps^{-2 beta_*} ||u||^2)
  double slack_iii = 0.0;     // a^* |u|^2 - |||u|||^2
};

struct EmbeddingAudit {
  std::vector<EmbeddingRow> rows;
  double c_lo_var = 0.0;
  double c_var_hi = 0.0;
  double c_ii = 0.0;
  int violations_iii = 0;
};

/// Requires at least 10 samples.
EmbeddingAudit audit_embeddings(const std::vector<Field>& samples, const NormContext& ctx,
                                Constraint kind = Constraint::dirichlet);
void write_embedding_csv(const EmbeddingAudit& audit, const std::filesystem::path& path);

struct PoincareResult {
  double lambda_min = 0.0;
  Field eigenvector;
};

/// Smallest generalized eigenvalue of A/2 against M on the constrained
/// subspace. Throws std::runtime_error when it is not positive.
PoincareResult poincare_constant(Constraint kind, double t, const KernelSpec& spec, const Mesh& mesh,
                                 const QuadratureOptions& opts = {});
PoincareResult poincare_constant(Constraint kind, const SparseMatrix& stiffness, const SparseMatrix& mass,
                                 const Mesh& mesh);

}  // namespace nlv

#include "nlv/spaces.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "nlv/io.hpp"

namespace nlv {

std::string to_string(Constraint c) { return c == Constraint::dirichlet ? "dirichlet" : "neumann"; }

Constraint constraint_from_string(const std::string& s) {
  if (s == "dirichlet") return Constraint::dirichlet;
  if (s == "neumann") return Constraint::neumann;
  throw std::invalid_argument("unknown constraint kind: " + s);
}

SparseMatrix assemble_seminorm(const OrderField& order, const Mesh& mesh, const QuadratureOptions& opts) {
  const int n = mesh.dim;
  auto k = [&order, n](const Point& x, const Point& y) {
    const double r = distance(x, y, n);
    return 0.5 * (std::pow(r, -n - 2.0 * order(x)) + std::pow(r, -n - 2.0 * order(y)));
  };
  return assemble_pair_form(mesh, k, std::nullopt, opts);
}

double variable_seminorm(const Field& u, const OrderField& order, const Mesh& mesh, const QuadratureOptions& opts) {
  return std::sqrt(std::max(0.0, u.dot(assemble_seminorm(order, mesh, opts) * u)));
}

double energy_norm(const Field& u, double t, const KernelSpec& spec, const Mesh& mesh,
                   const QuadratureOptions& opts) {
  const SparseMatrix a = assemble_stiffness(t, spec, mesh, opts).matrix;
  return std::sqrt(std::max(0.0, 0.5 * u.dot(a * u)));
}

double constraint_value(const Field& u, Constraint kind, const Mesh& mesh) {
  if (kind == Constraint::dirichlet) {
    const SparseMatrix mi = assemble_mass(mesh, Region::interaction);
    return u.dot(mi * u);
  }
  const SparseMatrix m = assemble_mass(mesh);
  const double total = Field::Ones(u.size()).dot(m * u);
  return total * total;
}

namespace {

double quad(const SparseMatrix& a, const Field& u) { return std::max(0.0, u.dot(a * u)); }

}  // namespace

NormContext::NormContext(const KernelSpec& spec, const Mesh& mesh, double t, const QuadratureOptions& opts)
    : spec_(spec),
      mesh_(&mesh),
      mass_(assemble_mass(mesh)),
      mass_omega_(assemble_mass(mesh, Region::interior)),
      mass_layer_(assemble_mass(mesh, Region::interaction)),
      stiffness_(assemble_stiffness(t, spec, mesh, opts).matrix),
      s_var_(assemble_seminorm(spec.order, mesh, opts)) {
  if (spec.order.is_constant) {
    s_lo_ = s_var_;
    s_hi_ = s_var_;
  } else {
    s_lo_ = assemble_seminorm(OrderField::constant(spec.order.beta_lo), mesh, opts);
    s_hi_ = assemble_seminorm(OrderField::constant(spec.order.beta_hi), mesh, opts);
  }
}

NormReport NormContext::report(const Field& u, Constraint kind) const {
  NormReport r;
  r.seminorm_var = std::sqrt(quad(s_var_, u));
  r.seminorm_lo = std::sqrt(quad(s_lo_, u));
  r.seminorm_hi = std::sqrt(quad(s_hi_, u));
  r.l2 = std::sqrt(quad(mass_, u));
  r.energy = std::sqrt(0.5 * quad(stiffness_, u));
  if (kind == Constraint::dirichlet) {
    r.constraint_value = quad(mass_layer_, u);
  } else {
    const double total = Field::Ones(u.size()).dot(mass_ * u);
    r.constraint_value = total * total;
  }
  return r;
}

double NormContext::full_var(const Field& u) const { return std::sqrt(quad(mass_, u) + quad(s_var_, u)); }
double NormContext::full_lo(const Field& u) const { return std::sqrt(quad(mass_, u) + quad(s_lo_, u)); }
double NormContext::full_hi(const Field& u) const { return std::sqrt(quad(mass_, u) + quad(s_hi_, u)); }

std::vector<Field> sample_fields(const Mesh& mesh, int count, std::uint64_t seed,
                                 std::optional<Constraint> constraint) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  const int n = mesh.num_nodes();
  Point lo{mesh.nodes[0][0], mesh.nodes[0][1]};
  Point hi = lo;
  for (const auto& p : mesh.nodes) {
    for (int d = 0; d < mesh.dim; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  auto rel = [&](const Point& p, int d) { return (p[d] - lo[d]) / (hi[d] - lo[d]); };

  SparseMatrix m;
  double total_mass = 0.0;
  if (constraint == Constraint::neumann) {
    m = assemble_mass(mesh);
    total_mass = Field::Ones(n).dot(m * Field::Ones(n));
  }

  std::vector<Field> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    Field u(n);
    switch (s % 3) {
      case 0: {
        std::array<double, 4> c{};
        for (auto& v : c) v = unit(rng);
        const double phase = std::numbers::pi * pos(rng);
        for (int i = 0; i < n; ++i) {
          const Point& p = mesh.nodes[i];
          double v = 0.0;
          for (int k = 0; k < 4; ++k) {
            double term = std::sin((k + 1) * std::numbers::pi * rel(p, 0) + phase);
            if (mesh.dim == 2) term *= std::cos(k * std::numbers::pi * rel(p, 1));
            v += c[k] * term / (k + 1);
          }
          u[i] = v;
        }
        break;
      }
      case 1:
        for (int i = 0; i < n; ++i) u[i] = unit(rng);
        break;
      default: {
        Point c{lo[0] + (hi[0] - lo[0]) * pos(rng), lo[1] + (hi[1] - lo[1]) * pos(rng)};
        const double width = 0.05 + 0.25 * pos(rng) * (hi[0] - lo[0]);
        const double amp = unit(rng);
        for (int i = 0; i < n; ++i) {
          const double r = distance(mesh.nodes[i], c, mesh.dim);
          u[i] = amp * std::exp(-r * r / (width * width));
        }
      }
    }
    if (constraint == Constraint::dirichlet) {
      for (int i = 0; i < n; ++i)
        if (mesh.in_layer_closure(i)) u[i] = 0.0;
    } else if (constraint == Constraint::neumann) {
      u.array() -= Field::Ones(n).dot(m * u) / total_mass;
    }
    if (u.cwiseAbs().maxCoeff() == 0.0) {
      // Keep every sample nonzero.
      for (int i = 0; i < n; ++i)
        if (!constraint || constraint != Constraint::dirichlet || !mesh.in_layer_closure(i)) u[i] = unit(rng);
      if (constraint == Constraint::neumann) u.array() -= Field::Ones(n).dot(m * u) / total_mass;
    }
    out.push_back(std::move(u));
  }
  return out;
}

EmbeddingAudit audit_embeddings(const std::vector<Field>& samples, const NormContext& ctx, Constraint kind) {
  if (samples.size() < 10) throw std::invalid_argument("audit_embeddings: need at least 10 sample fields");
  const KernelSpec& spec = ctx.spec();
  const double a_lo = spec.tensor.a_lo;
  const double a_hi = spec.tensor.a_hi;
  const double eps_term = std::pow(spec.horizon, -2.0 * spec.order.beta_lo);
  EmbeddingAudit audit;
  audit.c_ii = -std::numeric_limits<double>::infinity();
  for (const Field& u : samples) {
    EmbeddingRow row;
    row.norms = ctx.report(u, kind);
    const double fv = ctx.full_var(u);
    const double fl = ctx.full_lo(u);
    const double fh = ctx.full_hi(u);
    row.ratio_lo_var = fv > 0.0 ? fl / fv : 0.0;
    row.ratio_var_hi = fh > 0.0 ? fv / fh : 0.0;
    const double semi2 = row.norms.seminorm_var * row.norms.seminorm_var;
    const double energy2 = row.norms.energy * row.norms.energy;
    const double l2sq = row.norms.l2 * row.norms.l2;
    row.c_ii = l2sq > 0.0 ? (semi2 - energy2 / a_lo) / (eps_term * l2sq) : 0.0;
    row.slack_iii = a_hi * semi2 - energy2;
    audit.c_lo_var = std::max(audit.c_lo_var, row.ratio_lo_var);
    audit.c_var_hi = std::max(audit.c_var_hi, row.ratio_var_hi);
    audit.c_ii = std::max(audit.c_ii, row.c_ii);
    if (row.slack_iii < 0.0) ++audit.violations_iii;
    audit.rows.push_back(row);
  }
  audit.c_ii = std::max(audit.c_ii, 0.0);
  return audit;
}

void write_embedding_csv(const EmbeddingAudit& audit, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"sample", "seminorm_var", "seminorm_lo", "seminorm_hi", "l2", "energy", "constraint_value",
            "ratio_lo_var", "ratio_var_hi", "c_ii", "slack_iii"});
  for (std::size_t i = 0; i < audit.rows.size(); ++i) {
    const auto& r = audit.rows[i];
    w.field(i)
        .field(r.norms.seminorm_var)
        .field(r.norms.seminorm_lo)
        .field(r.norms.seminorm_hi)
        .field(r.norms.l2)
        .field(r.norms.energy)
        .field(r.norms.constraint_value)
        .field(r.ratio_lo_var)
        .field(r.ratio_var_hi)
        .field(r.c_ii)
        .field(r.slack_iii);
    w.end_row();
  }
}

PoincareResult poincare_constant(Constraint kind, const SparseMatrix& stiffness, const SparseMatrix& mass,
                                 const Mesh& mesh) {
  const Eigen::MatrixXd a = 0.5 * Eigen::MatrixXd(stiffness);
  const Eigen::MatrixXd m(mass);
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd z;  // basis of the constrained subspace
  if (kind == Constraint::dirichlet) {
    const auto free = mesh.free_nodes();
    z = Eigen::MatrixXd::Zero(n, static_cast<int>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) z(free[k], static_cast<int>(k)) = 1.0;
  } else {
    const Eigen::VectorXd c = m * Eigen::VectorXd::Ones(n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    z = q.rightCols(n - 1);
  }
  if (z.cols() == 0) throw std::runtime_error("poincare_constant: empty constrained subspace");
  const Eigen::MatrixXd ar = z.transpose() * a * z;
  const Eigen::MatrixXd mr = z.transpose() * m * z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(ar, mr);
  if (es.info() != Eigen::Success) throw std::runtime_error("poincare_constant: eigensolver failed");
  PoincareResult r;
  r.lambda_min = es.eigenvalues()[0];
  r.eigenvector = z * es.eigenvectors().col(0);
  const double scale = a.cwiseAbs().maxCoeff() / std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if (!(r.lambda_min > 1e-12 * scale)) {
    throw std::runtime_error("poincare_constant: restricted problem is singular (lambda_min = " +
                             format_double(r.lambda_min) + ")");
  }
  return r;
}

PoincareResult poincare_constant(Constraint kind, double t, const KernelSpec& spec, const Mesh& mesh,
                                 const QuadratureOptions& opts) {
  return poincare_constant(kind, assemble_stiffness(t, spec, mesh, opts).matrix, assemble_mass(mesh), mesh);
}

}  // namespace nlv

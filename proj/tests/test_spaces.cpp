#include <cmath>

#include "doctest.h"
#include "nlv/spaces.hpp"
#include "oracle.hpp"

using namespace nlv;

namespace {

KernelSpec line_spec(OrderField order, double horizon) {
  KernelSpec s;
  s.order = std::move(order);
  s.tensor = DiffusionTensor::identity();
  s.horizon = horizon;
  s.dim = 1;
  return s;
}

}  // namespace

TEST_CASE("seminorm of a hat function matches the dense oracle") {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, 0.25);
  Field hat = Field::Zero(m.num_nodes());
  hat[m.num_nodes() / 2] = 1.0;
  const double got = variable_seminorm(hat, OrderField::constant(0.5), m);

  oracle::Line l;
  for (const auto& p : m.nodes) l.nodes.push_back(p[0]);
  l.beta = [](double) { return 0.5; };
  l.horizon = 100.0;  // covers the whole line
  const Eigen::MatrixXd s = oracle::stiffness(l);
  const double ref = std::sqrt(hat.dot(s * hat));
  MESSAGE("seminorm " << got << " oracle " << ref);
  CHECK(std::abs(got - ref) / ref < 1e-5);

  CHECK(variable_seminorm(Field::Constant(m.num_nodes(), 2.0), OrderField::constant(0.5), m) < 1e-6 * got);
  CHECK(std::abs(variable_seminorm(-3.0 * hat, OrderField::constant(0.5), m) - 3.0 * got) < 1e-12 * got);
}

TEST_CASE("energy norm equals half the seminorm when the horizon covers the domain") {
  const double diam = 2.0;
  const KernelSpec spec = line_spec(OrderField::constant(0.4), diam + 0.1);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon, 0.5);
  const auto fields = sample_fields(m, 6, 11);
  for (const Field& u : fields) {
    const double e = energy_norm(u, 0.0, spec, m);
    const double s = variable_seminorm(u, spec.order, m);
    CHECK(std::abs(e * e - 0.5 * s * s) <= 1e-6 * e * e);
  }
  KernelSpec doubled = spec;
  doubled.tensor = DiffusionTensor::scaled_identity(2.0);
  const double e1 = energy_norm(fields[0], 0.0, spec, m);
  const double e2 = energy_norm(fields[0], 0.0, doubled, m);
  CHECK(std::abs(e2 * e2 - 2.0 * e1 * e1) <= 1e-12 * e2 * e2);
}

TEST_CASE("constraint values") {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, 0.25);
  const Field zero = Field::Zero(m.num_nodes());
  CHECK(constraint_value(zero, Constraint::dirichlet, m) == 0.0);
  CHECK(constraint_value(zero, Constraint::neumann, m) == 0.0);
  const Field one = Field::Ones(m.num_nodes());
  CHECK(constraint_value(one, Constraint::neumann, m) == doctest::Approx(1.5 * 1.5).epsilon(1e-13));
  Field inner = one;
  for (int i = 0; i < m.num_nodes(); ++i)
    if (m.in_layer_closure(i)) inner[i] = 0.0;
  CHECK(constraint_value(inner, Constraint::dirichlet, m) == 0.0);
}

TEST_CASE("embedding audit") {
  SUBCASE("constant order collapses the chain") {
    const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.3);
    const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
    const NormContext ctx(spec, m);
    const auto audit = audit_embeddings(sample_fields(m, 12, 3, Constraint::dirichlet), ctx);
    CHECK(audit.c_lo_var <= 1.0 + 1e-6);
    CHECK(audit.c_var_hi <= 1.0 + 1e-6);
  }
  SUBCASE("upper embedding has no violations over 100 fields") {
    const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.3);
    const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
    const NormContext ctx(spec, m);
    const auto audit = audit_embeddings(sample_fields(m, 100, 5), ctx);
    CHECK(audit.violations_iii == 0);
    CHECK(audit.c_lo_var > 0.0);
    CHECK(std::isfinite(audit.c_var_hi));
    MESSAGE("C lo/var " << audit.c_lo_var << " var/hi " << audit.c_var_hi << " (ii) " << audit.c_ii);
  }
  SUBCASE("lower embedding constant is logged") {
    const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 2.0);
    const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon, 0.25);
    const NormContext ctx(spec, m);
    const auto audit = audit_embeddings(sample_fields(m, 20, 9), ctx);
    CHECK(std::isfinite(audit.c_ii));
    MESSAGE("(ii) constant " << audit.c_ii);
  }
  CHECK_THROWS_AS(audit_embeddings({}, NormContext(line_spec(OrderField::constant(0.5), 0.3),
                                                   build_interval_mesh(0.0, 1.0, 4, 0.3))),
                  std::invalid_argument);
}

TEST_CASE("energy over full norm is bounded on constrained fields") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.3);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  const NormContext ctx(spec, m);
  double lo = 1e300, hi = 0.0;
  for (const Field& u : sample_fields(m, 200, 21, Constraint::dirichlet)) {
    const double r = ctx.report(u, Constraint::dirichlet).energy / ctx.full_var(u);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  MESSAGE("ratio range [" << lo << ", " << hi << "]");
  CHECK(lo > 0.0);
  CHECK(std::isfinite(hi));
}

TEST_CASE("poincare constant") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.3);
  for (Constraint kind : {Constraint::dirichlet, Constraint::neumann}) {
    const Mesh coarse = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
    const Mesh fine = build_interval_mesh(0.0, 1.0, 32, spec.horizon);
    const PoincareResult pc = poincare_constant(kind, 0.0, spec, coarse);
    const PoincareResult pf = poincare_constant(kind, 0.0, spec, fine);
    CHECK(pc.lambda_min > 0.0);
    CHECK(pf.lambda_min > 0.0);
    const double drift = std::abs(pf.lambda_min - pc.lambda_min) / pf.lambda_min;
    MESSAGE(to_string(kind) << " lambda " << pc.lambda_min << " -> " << pf.lambda_min);
    CHECK(drift < 0.1);
    if (kind == Constraint::neumann) {
      const SparseMatrix mass = assemble_mass(fine);
      const double mean = Field::Ones(fine.num_nodes()).dot(mass * pf.eigenvector);
      CHECK(std::abs(mean) <= 1e-10 * std::sqrt(pf.eigenvector.dot(mass * pf.eigenvector)));
    } else {
      for (int i = 0; i < fine.num_nodes(); ++i)
        if (fine.in_layer_closure(i)) CHECK(pf.eigenvector[i] == 0.0);
    }
  }
}

TEST_CASE("constraint names round trip") {
  CHECK(constraint_from_string(to_string(Constraint::neumann)) == Constraint::neumann);
  CHECK_THROWS_AS(constraint_from_string("robin"), std::invalid_argument);
}

#include <cmath>
#include <random>

#include "doctest.h"
#include "nlv/calculus.hpp"
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

oracle::Line line_of(const Mesh& m, const KernelSpec& s) {
  oracle::Line l;
  for (const auto& p : m.nodes) l.nodes.push_back(p[0]);
  l.beta = [order = s.order](double x) { return order(Point{x, 0.0}); };
  l.horizon = s.horizon;
  return l;
}

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("stiffness matches the dense oracle") {
  for (const auto& order : {OrderField::constant(0.5), OrderField::sine(0.4, 0.2)}) {
    const KernelSpec spec = line_spec(order, 0.3);
    const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
    const Eigen::MatrixXd a(assemble_stiffness(0.0, spec, m).matrix);
    const Eigen::MatrixXd ref = oracle::stiffness(line_of(m, spec));
    double worst = 0.0;
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j)
        worst = std::max(worst, std::abs(a(i, j) - ref(i, j)) / std::max(std::abs(ref(i, j)), 1e-300));
    MESSAGE(order.name << " worst entry error " << worst << " norm error " << max_abs(a - ref) / max_abs(ref));
    CHECK(worst < 1e-6);
  }
}

namespace {

Field random_field(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Field u(n);
  for (int i = 0; i < n; ++i) u[i] = d(rng);
  return u;
}

}  // namespace

TEST_CASE("green and gauss identities hold on the pair measure") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.3);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 3; ++k) {
    const Field u = random_field(m.num_nodes(), rng);
    const Field v = random_field(m.num_nodes(), rng);
    const GreenResidual g = green_residual(u, v, 0.0, spec, m);
    CHECK(g.residual <= 1e-10 * g.scale);
    const GaussResidual gr = gauss_residual(flux_field(u, 0.0, spec, m), spec, m);
    CHECK(gr.residual <= 1e-8 * (std::abs(gr.divergence) + 1.0));
    const double b = v.dot(assemble_stiffness(0.0, spec, m).matrix * u);
    CHECK(std::abs(b - g.form) <= 1e-10 * std::abs(b));
  }
}

TEST_CASE("literal mode leaves a gauss residual for varying order") {
  KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.3);
  spec.symmetrize = false;
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  std::mt19937_64 rng(3);
  const Field u = random_field(m.num_nodes(), rng);
  const GaussResidual gr = gauss_residual(flux_field(u, 0.0, spec, m), spec, m);
  MESSAGE("literal gauss residual " << gr.residual);
  CHECK(std::isfinite(gr.residual));
}

TEST_CASE("stiffness structure") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  const Eigen::MatrixXd a(assemble_stiffness(0.0, spec, m).matrix);
  const double norm = max_abs(a);
  CHECK(max_abs(a - a.transpose()) <= 1e-12 * norm);
  CHECK((a * Eigen::VectorXd::Ones(a.rows())).cwiseAbs().maxCoeff() <= 1e-10 * norm);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * norm);
}

TEST_CASE("apply_diffusion reproduces generalized eigenpairs") {
  const KernelSpec spec = line_spec(OrderField::constant(0.4), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 32, spec.horizon);
  const Eigen::MatrixXd a(assemble_stiffness(0.0, spec, m).matrix);
  const Eigen::MatrixXd mm(assemble_mass(m));
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, mm);
  for (int k : {1, 5, 20}) {
    const Field u = es.eigenvectors().col(k);
    const Field w = apply_diffusion(u, 0.0, spec, m);
    CHECK((w - es.eigenvalues()[k] * u).norm() <= 1e-4 * es.eigenvalues()[k] * u.norm());
  }
  std::mt19937_64 rng(1);
  const Field u = random_field(m.num_nodes(), rng);
  const Field v = random_field(m.num_nodes(), rng);
  const Field lhs = apply_diffusion(2.0 * u + v, 0.0, spec, m);
  const Field rhs = 2.0 * apply_diffusion(u, 0.0, spec, m) + apply_diffusion(v, 0.0, spec, m);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("interaction operator matches the oracle off the nodes") {
  const KernelSpec spec = line_spec(OrderField::sine(0.4, 0.2), 0.3);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  std::mt19937_64 rng(11);
  const Field u = random_field(m.num_nodes(), rng);
  std::vector<double> uv(u.data(), u.data() + u.size());
  for (double x : {-0.3, -0.07, 1.05, 1.2}) {
    const double got = apply_interaction(u, 0.0, {x, 0.0}, spec, m);
    const double ref = oracle::interaction(line_of(m, spec), uv, x);
    CHECK(std::abs(got - ref) <= 1e-6 * std::abs(ref));
  }
  CHECK_THROWS_AS(apply_interaction(u, 0.0, {0.5, 0.0}, spec, m), std::invalid_argument);
}

TEST_CASE("adjoint of a linear field") {
  KernelSpec spec = line_spec(OrderField::constant(0.5), 1.0);
  const Mesh m = build_interval_mesh(0.0, 1.0, 4, 1.0);
  Field u(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) u[i] = m.nodes[i][0];
  const Vec2 d = apply_adjoint(m, u, {0.0, 0.0}, {0.5, 0.0}, spec);
  CHECK(d[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(apply_adjoint(m, u, {0.2, 0.0}, {0.2, 0.0}, spec), std::domain_error);
}

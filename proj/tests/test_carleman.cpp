#include <cmath>

#include "doctest.h"
#include "nlv/carleman.hpp"
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

double quad(const SparseMatrix& a, const Field& u) { return u.dot(a * u); }

}  // namespace

TEST_CASE("weight") {
  CHECK(weight_eval(CarlemanWeight(3.0, 2.0, 1), 0.0) == 1.0);
  CHECK(weight_eval(CarlemanWeight(1.0, 5.0, 1), 1.0) == doctest::Approx(2.718282).epsilon(1e-6));
  CHECK(weight_eval(CarlemanWeight(2.0, 1.0, -1), 0.5) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK_THROWS_AS(CarlemanWeight(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(CarlemanWeight(1.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("zero trajectory gives zero terms") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  StiffnessCache cache(spec, m);
  const Trajectory tr = solve_forward(Field::Zero(m.num_nodes()), {}, Constraint::dirichlet, TimeGrid(1.0, 6), cache);
  const auto r = carleman_terms(tr, {}, CarlemanWeight(2.0, 3.0, 1), CarlemanVariant::forward, cache);
  CHECK(r.lhs() == 0.0);
  CHECK(r.rhs_source == 0.0);
  CHECK(r.rhs_boundary == 0.0);
  CHECK(r.ratio(5.0) == 0.0);
  const auto cert = certify({carleman_profile(tr, {}, CarlemanVariant::forward, cache)});
  CHECK(cert.certified);
  CHECK(cert.constant == 0.0);
}

TEST_CASE("terms scale quadratically and ratios are scale invariant") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.2), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const auto fields = sample_fields(m, 2, 3, Constraint::dirichlet);
  const Field src = fields[1];
  const Source f = [&](double t) -> Field { return std::sin(2.0 * t) * src; };
  const Source cf = [&](double t) -> Field { return -3.0 * f(t); };
  const TimeGrid grid(1.0, 20);
  const auto a = solve_forward(fields[0], f, Constraint::dirichlet, grid, cache);
  const auto b = solve_forward(-3.0 * fields[0], cf, Constraint::dirichlet, grid, cache);
  const CarlemanWeight w(4.0, 8.0, 1);
  const auto ra = carleman_terms(a, f, w, CarlemanVariant::forward, cache);
  const auto rb = carleman_terms(b, cf, w, CarlemanVariant::forward, cache);
  for (auto [x, y] : {std::pair{ra.lhs_dt, rb.lhs_dt}, {ra.lhs_diff, rb.lhs_diff}, {ra.lhs_l2, rb.lhs_l2},
                      {ra.lhs_semi, rb.lhs_semi}, {ra.rhs_source, rb.rhs_source}, {ra.rhs_boundary, rb.rhs_boundary}}) {
    CHECK(x >= 0.0);
    CHECK(std::isfinite(x));
    CHECK(std::abs(y - 9.0 * x) <= 1e-10 * y);
  }
  CHECK(std::abs(ra.log_ratio(100.0) - rb.log_ratio(100.0)) <= 1e-10);
  // No overflow at the top of the grid: 2 s phi(T) = 16 e^4.
  CHECK(ra.log_scale > 500.0);
  CHECK(std::isfinite(ra.log_ratio(0.0)));
}

TEST_CASE("lhs_l2 grows at least linearly in s") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const Field u0 = sample_fields(m, 1, 7, Constraint::dirichlet)[0];
  const auto p = carleman_profile(solve_forward(u0, {}, Constraint::dirichlet, TimeGrid(1.0, 20), cache), {},
                                  CarlemanVariant::forward, cache);
  double prev = 0.0;
  for (double s : {1.0, 2.0, 4.0, 8.0}) {
    const auto r = carleman_terms(p, CarlemanWeight(2.0, s, 1));
    const double l2 = std::log(r.lhs_l2) + r.log_scale;  // log of the unscaled term
    if (s > 1.0) CHECK(l2 - prev >= std::log(2.0) - 1e-12);
    prev = l2;
  }
}

TEST_CASE("eigenmode terms match the semi-analytic evaluation") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const PoincareResult eig = poincare_constant(Constraint::dirichlet, cache.at(0.0), cache.mass(), m);
  const Field& w = eig.eigenvector;
  const double mu = 2.0 * eig.lambda_min;
  const TimeGrid grid(1.0, 400);
  Trajectory tr;
  tr.grid = grid;
  tr.kind = Constraint::dirichlet;
  for (int k = 0; k < grid.count(); ++k) tr.snapshots.push_back(std::exp(-mu * grid.time(k)) * w);

  const SparseMatrix m_omega = assemble_mass(m, Region::interior);
  const SparseMatrix s = assemble_seminorm(spec.order, m);
  DiffusionOperator op(cache);
  const double c_l2 = quad(m_omega, w);
  const double c_diff = quad(m_omega, op.apply(w, 0.0));
  const double c_semi = quad(s, w);
  const double c_h = quad(cache.mass(), w) + c_semi;

  const auto profile = carleman_profile(tr, {}, CarlemanVariant::forward, cache);
  // Weights resolved by the grid: 2 s lambda phi(T) dt well below 1.
  for (auto [lambda, sv] : {std::pair{1.0, 1.0}, {2.0, 2.0}, {2.0, 1.0}}) {
    const CarlemanWeight wt(lambda, sv, 1);
    const auto r = carleman_terms(profile, wt);
    auto time_integral = [&](auto g) {
      return oracle::integral(
          [&](double t) {
            const double phi = std::exp(lambda * t);
            return g(t, phi) * std::exp(-2.0 * mu * t + 2.0 * sv * phi - r.log_scale);
          },
          0.0, grid.T, 1e-12);
    };
    const double dt_ref = mu * mu * c_l2 * time_integral([&](double, double phi) { return 1.0 / (sv * phi); });
    const double diff_ref = c_diff * time_integral([&](double, double phi) { return 1.0 / (sv * phi); });
    const double l2_ref = c_l2 * time_integral([&](double, double phi) { return sv * lambda * lambda * phi; });
    const double semi_ref = lambda * c_semi * time_integral([](double, double) { return 1.0; });
    const double boundary_ref = c_h * (1.0 + std::exp(-2.0 * mu * grid.T));
    MESSAGE("lambda " << lambda << " s " << sv << ": dt " << r.lhs_dt / dt_ref << " diff " << r.lhs_diff / diff_ref
                      << " l2 " << r.lhs_l2 / l2_ref << " semi " << r.lhs_semi / semi_ref);
    CHECK(std::abs(r.lhs_dt / dt_ref - 1.0) < 0.02);
    CHECK(std::abs(r.lhs_diff / diff_ref - 1.0) < 0.02);
    CHECK(std::abs(r.lhs_l2 / l2_ref - 1.0) < 0.02);
    CHECK(std::abs(r.lhs_semi / semi_ref - 1.0) < 0.02);
    CHECK(std::abs(r.rhs_boundary / boundary_ref - 1.0) < 1e-12);
    CHECK(r.rhs_source == 0.0);
  }
}

TEST_CASE("terminal variant") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.2), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const TimeGrid grid(1.0, 20);
  auto build = [&](const Field& w) {
    Trajectory tr;
    tr.grid = grid;
    tr.kind = Constraint::neumann;
    for (int k = 0; k < grid.count(); ++k) tr.snapshots.push_back((grid.T - grid.time(k)) * w);
    return tr;
  };
  const CarlemanWeight wt(2.0, 2.0, -1);
  const Field inside = sample_fields(m, 1, 1, Constraint::dirichlet)[0];
  const Field everywhere = sample_fields(m, 2, 1)[1];
  const auto r0 = carleman_terms(build(inside), {}, wt, CarlemanVariant::terminal, cache);
  const auto r1 = carleman_terms(build(everywhere), {}, wt, CarlemanVariant::terminal, cache);
  CHECK(r0.rhs_interaction == 0.0);
  CHECK(r1.rhs_interaction > 0.0);
  CHECK(r1.rhs_boundary > 0.0);
  CHECK(std::isfinite(r1.ratio(1.0)));

  Trajectory bad = build(everywhere);
  bad.snapshots.back() = everywhere;
  CHECK_THROWS_AS(carleman_terms(bad, {}, wt, CarlemanVariant::terminal, cache), std::invalid_argument);
  Trajectory leak = build(everywhere);
  leak.kind = Constraint::dirichlet;
  CHECK_THROWS_AS(carleman_terms(leak, {}, CarlemanWeight(2.0, 2.0, 1), CarlemanVariant::forward, cache),
                  std::invalid_argument);
}

TEST_CASE("certification of a homogeneous dirichlet suite") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.2), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const TimeGrid grid(1.0, 40);
  std::vector<CarlemanProfile> suite;
  std::vector<Trajectory> trajectories;
  for (const Field& u0 : sample_fields(m, 10, 42, Constraint::dirichlet)) {
    trajectories.push_back(solve_forward(u0, {}, Constraint::dirichlet, grid, cache));
    suite.push_back(carleman_profile(trajectories.back(), {}, CarlemanVariant::forward, cache));
  }
  CertifyOptions opts;
  const Certificate cert = certify(suite, opts);
  MESSAGE(certificate_summary(cert, opts));
  CHECK(cert.certified);
  CHECK(std::isfinite(cert.constant));
  for (int i = 1; i < 3; ++i) {  // lambda in {4, 8}
    const double hi = std::max(cert.c_grid[i][2], cert.c_grid[i][3]);
    const double lo = std::min(cert.c_grid[i][2], cert.c_grid[i][3]);
    CHECK(hi <= 2.0 * lo);
  }
  for (const auto& row : cert.rows) {
    const auto& r = row.report;
    for (double v : {r.lhs_dt, r.lhs_diff, r.lhs_l2, r.lhs_semi, r.rhs_source, r.rhs_boundary}) {
      CHECK(v >= 0.0);
      CHECK(std::isfinite(v));
    }
  }

  // A scaled copy of a member leaves the certificate unchanged.
  Trajectory scaled = trajectories[3];
  for (Field& u : scaled.snapshots) u *= 1e3;
  suite.push_back(carleman_profile(scaled, {}, CarlemanVariant::forward, cache));
  const Certificate again = certify(suite, opts);
  CHECK(again.lambda0 == cert.lambda0);
  CHECK(again.s0 == cert.s0);
  for (const auto& row : again.rows)
    if (row.member == 10) {
      const double k = again.k[row.lambda_index];
      const auto original = carleman_terms(suite[3], row.report.weight);
      CHECK(std::abs(row.report.log_ratio(k) - original.log_ratio(k)) <= 1e-10);
    }
}

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "nlv/io.hpp"
#include "nlv/solver.hpp"

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

// Smooth bump supported well inside Omega = (0,1).
Field bump(const Mesh& m) {
  Field u = Field::Zero(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) {
    const double x = m.nodes[i][0];
    if (x > 0.2 && x < 0.8) u[i] = std::pow(std::sin(std::numbers::pi * (x - 0.2) / 0.6), 2);
  }
  return u;
}

double mnorm(const SparseMatrix& m, const Field& u) { return std::sqrt(u.dot(m * u)); }

}  // namespace

TEST_CASE("zero data gives the zero trajectory") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  for (Constraint kind : {Constraint::dirichlet, Constraint::neumann}) {
    const Trajectory tr = solve_forward(Field::Zero(m.num_nodes()), {}, kind, TimeGrid(1.0, 5), spec, m);
    CHECK(tr.snapshots.size() == 6);
    for (const Field& u : tr.snapshots) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("implicit Euler decays in L2 and energy") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const Field u0 = sample_fields(m, 2, 4, Constraint::dirichlet)[1];
  const Trajectory tr = solve_forward(u0, {}, Constraint::dirichlet, TimeGrid(0.5, 20), cache);
  const SparseMatrix& a = cache.at(0.0);
  for (int k = 1; k < tr.grid.count(); ++k) {
    CHECK(mnorm(cache.mass(), tr.at(k)) <= mnorm(cache.mass(), tr.at(k - 1)));
    CHECK(tr.at(k).dot(a * tr.at(k)) <= tr.at(k - 1).dot(a * tr.at(k - 1)) * (1.0 + 1e-12));
    for (int i = 0; i < m.num_nodes(); ++i)
      if (m.in_layer_closure(i)) CHECK(tr.at(k)[i] == 0.0);
  }
}

TEST_CASE("neumann trajectories keep zero mean") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.3), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const Field u0 = sample_fields(m, 1, 8, Constraint::neumann)[0];
  const Field src = Field::Constant(m.num_nodes(), 1.0) + bump(m);
  SolverOptions opts;
  opts.scheme = Scheme::crank_nicolson;
  const Trajectory tr = solve_forward(u0, [&](double) { return src; }, Constraint::neumann, TimeGrid(1.0, 10),
                                      cache, opts);
  const Field one = Field::Ones(m.num_nodes());
  for (const Field& u : tr.snapshots) CHECK(std::abs(one.dot(cache.mass() * u)) <= 1e-10 * mnorm(cache.mass(), u));
}

TEST_CASE("solutions are linear in the data") {
  const KernelSpec spec = line_spec(OrderField::sine(0.4, 0.2), 0.3);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const auto fields = sample_fields(m, 4, 17, Constraint::dirichlet);
  const Source f1 = [&](double t) -> Field { return std::cos(t) * fields[2]; };
  const Source f2 = [&](double t) -> Field { return t * fields[3]; };
  const TimeGrid grid(1.0, 8);
  for (Scheme scheme : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
    SolverOptions opts;
    opts.scheme = scheme;
    const auto a = solve_forward(fields[0], f1, Constraint::dirichlet, grid, cache, opts);
    const auto b = solve_forward(fields[1], f2, Constraint::dirichlet, grid, cache, opts);
    const auto c = solve_forward(fields[0] + fields[1], [&](double t) -> Field { return f1(t) + f2(t); },
                                 Constraint::dirichlet, grid, cache, opts);
    CHECK((c.final() - a.final() - b.final()).norm() <= 1e-10 * c.final().norm());
  }
}

TEST_CASE("constraint violation of u0 is rejected") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  const Field one = Field::Ones(m.num_nodes());
  CHECK_THROWS_AS(solve_forward(one, {}, Constraint::dirichlet, TimeGrid(1.0, 2), spec, m), std::invalid_argument);
  CHECK_THROWS_AS(solve_forward(one, {}, Constraint::neumann, TimeGrid(1.0, 2), spec, m), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST_CASE("time dependent tensor") {
  KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  spec.tensor = DiffusionTensor::time_periodic(0.5, 3.0);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  StiffnessCache cache(spec, m);
  const Field u0 = bump(m);
  const Trajectory tr = solve_forward(u0, {}, Constraint::dirichlet, TimeGrid(1.0, 20), cache);
  // Same problem through full reassembly.
  KernelSpec slow = spec;
  slow.tensor.time_scale = nullptr;
  StiffnessCache slow_cache(slow, m);
  const Trajectory ref = solve_forward(u0, {}, Constraint::dirichlet, TimeGrid(1.0, 20), slow_cache);
  CHECK((tr.final() - ref.final()).norm() <= 1e-10 * ref.final().norm());
  for (int k = 1; k < tr.grid.count(); ++k) CHECK(mnorm(cache.mass(), tr.at(k)) <= mnorm(cache.mass(), tr.at(k - 1)));
}

TEST_CASE("manufactured right-hand side") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
  const TimeGrid grid(1.0, 10);
  const Field w = bump(m);

  std::vector<Field> constant(grid.count(), Field::Constant(m.num_nodes(), 3.0));
  for (const Field& f : manufactured_rhs(constant, grid, spec, m)) CHECK(f.cwiseAbs().maxCoeff() < 1e-9);

  std::vector<Field> linear;
  for (int k = 0; k < grid.count(); ++k) linear.push_back(grid.time(k) * w);
  for (const Field& d : time_derivative(linear, grid)) CHECK((d - w).cwiseAbs().maxCoeff() < 1e-12);

  const PoincareResult eig = poincare_constant(Constraint::dirichlet, 0.0, spec, m);
  const double mu = 2.0 * eig.lambda_min;
  const TimeGrid fine(0.2, 100);
  std::vector<Field> mode;
  for (int k = 0; k < fine.count(); ++k) mode.push_back(std::exp(-mu * fine.time(k)) * eig.eigenvector);
  // The Dirichlet weak form sees M f on the free nodes only.
  const SparseMatrix mass = assemble_mass(m);
  const double scale = (mass * eig.eigenvector).cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (const Field& f : manufactured_rhs(mode, fine, spec, m)) {
    const Field mf = mass * f;
    for (int i : m.free_nodes()) worst = std::max(worst, std::abs(mf[i]) / scale);
  }
  MESSAGE("eigenmode residual " << worst << " dt^2 mu^3 " << std::pow(fine.dt(), 2) * std::pow(mu, 3));
  CHECK(worst < std::pow(fine.dt(), 2) * std::pow(mu, 3));

  CHECK_THROWS_AS(time_derivative(std::vector<Field>(2, w), TimeGrid(1.0, 1)), std::invalid_argument);
}

namespace {

double manufactured_error(int elements, int steps, Scheme scheme) {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.2), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, elements, spec.horizon);
  StiffnessCache cache(spec, m);
  const Field w = poincare_constant(Constraint::dirichlet, cache.at(0.0), cache.mass(), m).eigenvector;
  const TimeGrid grid(1.0, steps);
  std::vector<Field> exact;
  for (int k = 0; k < grid.count(); ++k) exact.push_back(std::exp(-grid.time(k)) * w);
  DiffusionOperator op(cache);
  const Source f = sampled_source(manufactured_rhs(exact, grid, op), grid);
  SolverOptions opts;
  opts.scheme = scheme;
  const Trajectory tr = solve_forward(exact[0], f, Constraint::dirichlet, grid, cache, opts);
  double e2 = 0.0;
  for (int k = 0; k < grid.count(); ++k) {
    const Field d = tr.at(k) - exact[k];
    e2 += ((k == 0 || k == grid.steps) ? 0.5 : 1.0) * grid.dt() * d.dot(cache.mass() * d);
  }
  return std::sqrt(e2);
}

}  // namespace

TEST_CASE("manufactured solution converges") {
  for (Scheme scheme : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
    std::vector<double> err;
    for (int level = 0; level < 3; ++level) err.push_back(manufactured_error(16 << level, 8 << level, scheme));
    MESSAGE(to_string(scheme) << " errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(err[0] / err[1] >= 1.5);
    CHECK(err[1] / err[2] >= 1.5);
  }
}

TEST_CASE("regularity monitor") {
  const KernelSpec spec = line_spec(OrderField::sine(0.5, 0.2), 0.25);
  SUBCASE("zero data") {
    const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
    StiffnessCache cache(spec, m);
    const Trajectory tr = solve_forward(Field::Zero(m.num_nodes()), {}, Constraint::dirichlet, TimeGrid(1.0, 4), cache);
    const auto r = regularity_monitor(tr, {}, cache);
    CHECK(r.ratio == 0.0);
    CHECK_FALSE(r.inconsistent);
  }
  SUBCASE("scale invariance") {
    const Mesh m = build_interval_mesh(0.0, 1.0, 16, spec.horizon);
    StiffnessCache cache(spec, m);
    const TimeGrid grid(0.5, 10);
    const Field u0 = bump(m);
    const auto r1 = regularity_monitor(solve_forward(u0, {}, Constraint::dirichlet, grid, cache), {}, cache);
    const auto r2 = regularity_monitor(solve_forward(-7.5 * u0, {}, Constraint::dirichlet, grid, cache), {}, cache);
    CHECK(std::abs(r1.ratio - r2.ratio) <= 1e-10 * r1.ratio);
  }
  SUBCASE("refinement") {
    std::vector<double> ratios;
    for (int level = 0; level < 3; ++level) {
      const Mesh m = build_interval_mesh(0.0, 1.0, 16 << level, spec.horizon);
      StiffnessCache cache(spec, m);
      const TimeGrid grid(0.5, 10 << level);
      const Field src = bump(m);
      const Source f = [&](double t) -> Field { return std::cos(3.0 * t) * src; };
      const auto r = regularity_monitor(solve_forward(bump(m), f, Constraint::dirichlet, grid, cache), f, cache);
      ratios.push_back(r.ratio);
    }
    MESSAGE("ratios " << ratios[0] << " " << ratios[1] << " " << ratios[2]);
    CHECK(std::abs(ratios[2] - ratios[1]) / ratios[2] < 0.2);
  }
}

TEST_CASE("trajectory files round trip") {
  const KernelSpec spec = line_spec(OrderField::constant(0.5), 0.25);
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, spec.horizon);
  StiffnessCache cache(spec, m);
  const Trajectory tr = solve_forward(bump(m), {}, Constraint::dirichlet, TimeGrid(1.0, 3), cache);
  const auto dir = std::filesystem::temp_directory_path() / "nlv_test_solver";
  std::filesystem::create_directories(dir);
  write_trajectory_binary(tr, dir / "traj.bin");
  const Trajectory back = read_trajectory_binary(dir / "traj.bin");
  CHECK(back.grid.steps == 3);
  CHECK(back.kind == Constraint::dirichlet);
  for (int k = 0; k < 4; ++k) CHECK((back.at(k) - tr.at(k)).cwiseAbs().maxCoeff() == 0.0);
  write_trajectory_csv(tr, dir / "traj.csv");
  CHECK(read_csv(dir / "traj.csv").size() == 1 + 4 * static_cast<std::size_t>(m.num_nodes()));
  write_trajectory_report(tr, cache, dir / "report.csv");
  std::filesystem::remove_all(dir);
}

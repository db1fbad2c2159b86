#include "nlv/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "nlv/io.hpp"

namespace nlv {

std::string to_string(Scheme s) { return s == Scheme::implicit_euler ? "implicit_euler" : "crank_nicolson"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "implicit_euler") return Scheme::implicit_euler;
  if (s == "crank_nicolson") return Scheme::crank_nicolson;
  throw std::invalid_argument("unknown time scheme: " + s);
}

TimeGrid::TimeGrid(double final_time, int step_count) : T(final_time), steps(step_count) {
  if (!(final_time > 0.0) || !std::isfinite(final_time)) throw std::invalid_argument("TimeGrid: T must be positive");
  if (step_count < 1) throw std::invalid_argument("TimeGrid: need at least one step");
}

Source sampled_source(std::vector<Field> values, const TimeGrid& grid) {
  if (static_cast<int>(values.size()) != grid.count())
    throw std::invalid_argument("sampled_source: one value per grid time required");
  return [values = std::move(values), grid](double t) -> Field {
    const double s = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.steps));
    const int k = std::min(static_cast<int>(std::floor(s)), grid.steps - 1);
    const double w = s - k;
    if (w == 0.0) return values[k];
    if (w == 1.0) return values[k + 1];
    return (1.0 - w) * values[k] + w * values[k + 1];
  };
}

namespace {

SparseMatrix selection(int n, const std::vector<int>& idx) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) t.emplace_back(idx[k], static_cast<int>(k), 1.0);
  SparseMatrix p(n, static_cast<int>(idx.size()));
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

// Solves K x = b on the constrained space for one step matrix K.
class StepSolver {
 public:
  StepSolver(Constraint kind, const Mesh& mesh, const SparseMatrix& mass, double tol)
      : kind_(kind), tol_(tol), n_(mesh.num_nodes()) {
    if (kind == Constraint::dirichlet) {
      p_ = selection(n_, mesh.free_nodes());
      if (p_.cols() == 0) throw std::invalid_argument("solve_forward: no free nodes for the Dirichlet problem");
    } else {
      c_ = mass * Field::Ones(n_);
    }
  }

  void factor(const SparseMatrix& k) {
    use_iterative_ = false;
    if (kind_ == Constraint::dirichlet) {
      kr_ = p_.transpose() * k * p_;
      ldlt_.compute(kr_);
      if (ldlt_.info() != Eigen::Success || !(ldlt_.vectorD().minCoeff() > 0.0)) {
        cg_.setTolerance(tol_);
        cg_.compute(kr_);
        use_iterative_ = true;
      }
      return;
    }
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(k.nonZeros() + 2 * n_);
    for (int j = 0; j < k.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(k, j); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n_; ++i) {
      t.emplace_back(i, n_, c_[i]);
      t.emplace_back(n_, i, c_[i]);
    }
    kr_.resize(n_ + 1, n_ + 1);
    kr_.setFromTriplets(t.begin(), t.end());
    kr_.makeCompressed();
    lu_.analyzePattern(kr_);
    lu_.factorize(kr_);
    if (lu_.info() != Eigen::Success) {
      bicg_.setTolerance(tol_);
      bicg_.compute(kr_);
      use_iterative_ = true;
    }
  }

  Field solve(const Field& b) {
    if (kind_ == Constraint::dirichlet) {
      const Field br = p_.transpose() * b;
      Field x;
      if (use_iterative_) {
        x = cg_.solve(br);
        check(cg_.info(), "conjugate gradient");
      } else {
        x = ldlt_.solve(br);
      }
      return p_ * x;
    }
    Field bb(n_ + 1);
    bb.head(n_) = b;
    bb[n_] = 0.0;
    Field x;
    if (use_iterative_) {
      x = bicg_.solve(bb);
      check(bicg_.info(), "BiCGSTAB");
    } else {
      x = lu_.solve(bb);
    }
    return x.head(n_);
  }

 private:
  static void check(Eigen::ComputationInfo info, const char* what) {
    if (info != Eigen::Success) throw std::runtime_error(std::string("solve_forward: ") + what + " did not converge");
  }

  Constraint kind_;
  double tol_;
  int n_;
  SparseMatrix p_;
  Field c_;
  SparseMatrix kr_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg_;
  Eigen::SparseLU<SparseMatrix> lu_;
  Eigen::BiCGSTAB<SparseMatrix> bicg_;
  bool use_iterative_ = false;
};

}  // namespace

Field project_constraint(const Field& u, Constraint kind, const Mesh& mesh, const SparseMatrix& mass) {
  Field v = u;
  if (kind == Constraint::dirichlet) {
    for (int i = 0; i < mesh.num_nodes(); ++i)
      if (mesh.in_layer_closure(i)) v[i] = 0.0;
  } else {
    const Field one = Field::Ones(u.size());
    v.array() -= one.dot(mass * u) / one.dot(mass * one);
  }
  return v;
}

struct Propagator::Impl {
  StiffnessCache* cache;
  Constraint kind;
  TimeGrid grid;
  SolverOptions opts;
  SparseMatrix mf;
  double theta;
  bool frozen;
  StepSolver solver;
  std::optional<double> factored_at;

  Impl(StiffnessCache& c, Constraint k, const TimeGrid& g, const SolverOptions& o)
      : cache(&c), kind(k), grid(g), opts(o),
        mf(o.source_region ? assemble_mass(c.mesh(), o.source_region) : c.mass()),
        theta(o.scheme == Scheme::implicit_euler ? 1.0 : 0.5),
        frozen(o.freeze_operator || c.spec().tensor.time_independent),
        solver(k, c.mesh(), c.mass(), o.cg_tol) {}

  // u^{k+1} from u^k, plus dt Mf f(t_theta) when given.
  Field step(int k, const Field& u, const Field* fv) {
    const SparseMatrix& m = cache->mass();
    const double dt = grid.dt();
    const double tt = grid.time(k) + theta * dt;
    const double ta = frozen ? 0.0 : tt;
    const SparseMatrix& a = cache->at(ta);
    if (!factored_at || *factored_at != ta) {
      solver.factor(SparseMatrix(m + (theta * dt) * a));
      factored_at = ta;
    }
    Field rhs = m * u;
    if (theta < 1.0) rhs -= ((1.0 - theta) * dt) * (a * u);
    if (fv) rhs += dt * (mf * *fv);
    Field next = solver.solve(rhs);
    if (!next.allFinite()) throw std::runtime_error("solve_forward: non-finite step result");
    return next;
  }
};

Propagator::Propagator(StiffnessCache& cache, Constraint kind, const TimeGrid& grid, const SolverOptions& opts)
    : impl_(std::make_unique<Impl>(cache, kind, grid, opts)) {}
Propagator::~Propagator() = default;
Propagator::Propagator(Propagator&&) noexcept = default;
Propagator& Propagator::operator=(Propagator&&) noexcept = default;

const TimeGrid& Propagator::grid() const { return impl_->grid; }
Constraint Propagator::kind() const { return impl_->kind; }
StiffnessCache& Propagator::cache() const { return *impl_->cache; }

Trajectory Propagator::run(const Field& u0, const Source& f) {
  StiffnessCache& cache = *impl_->cache;
  const Mesh& mesh = cache.mesh();
  const SparseMatrix& m = cache.mass();
  const Constraint kind = impl_->kind;
  const int n = mesh.num_nodes();
  if (u0.size() != n) throw std::invalid_argument("solve_forward: u0 size does not match the mesh");
  if (!u0.allFinite()) throw std::invalid_argument("solve_forward: u0 has non-finite values");

  const double norm0 = std::sqrt(std::max(0.0, u0.dot(m * u0)));
  const double violation = kind == Constraint::dirichlet
                               ? std::sqrt(constraint_value(u0, kind, mesh))
                               : std::abs(Field::Ones(n).dot(m * u0));
  if (violation > impl_->opts.constraint_tol * norm0)
    throw std::invalid_argument("solve_forward: u0 violates the " + to_string(kind) +
                                " constraint (" + format_double(violation) + ")");

  const TimeGrid& grid = impl_->grid;
  Trajectory traj;
  traj.grid = grid;
  traj.kind = kind;
  traj.snapshots.reserve(grid.count());
  traj.snapshots.push_back(project_constraint(u0, kind, mesh, m));
  for (int k = 0; k < grid.steps; ++k) {
    Field fv;
    if (f) {
      fv = f(grid.time(k) + impl_->theta * grid.dt());
      if (fv.size() != n) throw std::invalid_argument("solve_forward: source size does not match the mesh");
    }
    traj.snapshots.push_back(impl_->step(k, traj.snapshots.back(), f ? &fv : nullptr));
  }
  return traj;
}

Field Propagator::advance(const Field& u0, int steps) {
  Field u = project_constraint(u0, impl_->kind, impl_->cache->mesh(), impl_->cache->mass());
  for (int k = 0; k < steps; ++k) u = impl_->step(k, u, nullptr);
  return u;
}

Field Propagator::advance_adjoint(const Field& v, int steps) {
  // Each step map is self-adjoint in the mass inner product, so the adjoint
  // of the product applies the same maps in reverse order.
  Field u = project_constraint(v, impl_->kind, impl_->cache->mesh(), impl_->cache->mass());
  for (int k = steps - 1; k >= 0; --k) u = impl_->step(k, u, nullptr);
  return u;
}

Trajectory solve_forward(const Field& u0, const Source& f, Constraint kind, const TimeGrid& grid,
                         StiffnessCache& cache, const SolverOptions& opts) {
  Propagator prop(cache, kind, grid, opts);
  return prop.run(u0, f);
}

Trajectory solve_forward(const Field& u0, const Source& f, Constraint kind, const TimeGrid& grid,
                         const KernelSpec& spec, const Mesh& mesh, const SolverOptions& opts,
                         const QuadratureOptions& quad) {
  StiffnessCache cache(spec, mesh, quad);
  return solve_forward(u0, f, kind, grid, cache, opts);
}

std::vector<Field> time_derivative(const std::vector<Field>& u, const TimeGrid& grid) {
  const int count = static_cast<int>(u.size());
  if (count < 3) throw std::invalid_argument("time derivative needs at least 3 grid times");
  if (count != grid.count()) throw std::invalid_argument("time derivative: one field per grid time required");
  const double dt = grid.dt();
  std::vector<Field> d(count);
  d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dt);
  for (int k = 1; k + 1 < count; ++k) d[k] = (u[k + 1] - u[k - 1]) / (2.0 * dt);
  d[count - 1] = (3.0 * u[count - 1] - 4.0 * u[count - 2] + u[count - 3]) / (2.0 * dt);
  return d;
}

std::vector<Field> manufactured_rhs(const std::vector<Field>& u_exact, const TimeGrid& grid,
                                    DiffusionOperator& op) {
  std::vector<Field> f = time_derivative(u_exact, grid);
  for (int k = 0; k < grid.count(); ++k) f[k] += op.apply(u_exact[k], grid.time(k));
  return f;
}

std::vector<Field> manufactured_rhs(const std::vector<Field>& u_exact, const TimeGrid& grid,
                                    const KernelSpec& spec, const Mesh& mesh, const QuadratureOptions& quad) {
  StiffnessCache cache(spec, mesh, quad);
  DiffusionOperator op(cache);
  return manufactured_rhs(u_exact, grid, op);
}

RegularityReport regularity_monitor(const Trajectory& traj, const Source& f, StiffnessCache& cache) {
  const Mesh& mesh = cache.mesh();
  const SparseMatrix& m = cache.mass();
  const SparseMatrix m_omega = assemble_mass(mesh, Region::interior);
  const SparseMatrix s = assemble_seminorm(cache.spec().order, mesh, cache.options());
  DiffusionOperator op(cache);
  const TimeGrid& grid = traj.grid;
  const double dt = grid.dt();
  auto hnorm = [&](const Field& u) { return std::sqrt(std::max(0.0, u.dot(m * u) + u.dot(s * u))); };

  RegularityReport r;
  double dt2 = 0.0, strong2 = 0.0, f2 = 0.0;
  for (int k = 0; k < grid.count(); ++k) {
    const Field& u = traj.at(k);
    const double wk = (k == 0 || k == grid.steps) ? 0.5 * dt : dt;
    r.sup_norm = std::max(r.sup_norm, hnorm(u));
    const Field du = op.apply(u, grid.time(k));
    strong2 += wk * std::max(0.0, du.dot(m_omega * du));
    if (f) {
      const Field fv = f(grid.time(k));
      f2 += wk * std::max(0.0, fv.dot(m * fv));
    }
    if (k > 0) {
      const Field v = (u - traj.at(k - 1)) / dt;
      dt2 += dt * std::max(0.0, v.dot(m_omega * v));
    }
  }
  r.dt_norm = std::sqrt(dt2);
  r.strong_norm = std::sqrt(strong2);
  r.source_norm = std::sqrt(f2);
  r.initial_norm = hnorm(traj.at(0));
  r.lhs = r.sup_norm + r.dt_norm + r.strong_norm;
  r.rhs = r.source_norm + r.initial_norm;
  if (r.rhs > 0.0) {
    r.ratio = r.lhs / r.rhs;
  } else {
    r.ratio = 0.0;
    r.inconsistent = r.lhs > 1e-14;
  }
  return r;
}

void write_trajectory_report(const Trajectory& traj, StiffnessCache& cache, const std::filesystem::path& path) {
  const SparseMatrix& m = cache.mass();
  CsvWriter w(path);
  w.header({"step", "time", "l2", "energy", "constraint_value", "l2_nonincreasing"});
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < traj.grid.count(); ++k) {
    const Field& u = traj.at(k);
    const double t = traj.grid.time(k);
    const double l2 = std::sqrt(std::max(0.0, u.dot(m * u)));
    const double energy = 0.5 * u.dot(cache.at(t) * u);
    w.field(k).field(t).field(l2).field(energy).field(constraint_value(u, traj.kind, cache.mesh()));
    w.field(l2 <= prev * (1.0 + 1e-12));
    w.end_row();
    prev = l2;
  }
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"time", "node", "value"});
  for (int k = 0; k < traj.grid.count(); ++k) {
    const Field& u = traj.at(k);
    for (int i = 0; i < u.size(); ++i) {
      w.field(traj.grid.time(k)).field(i).field(u[i]);
      w.end_row();
    }
  }
}

namespace {

constexpr char kMagic[8] = {'N', 'L', 'V', 'T', 'R', 'A', 'J', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("trajectory file truncated");
  return to_little(v);
}

}  // namespace

void write_trajectory_binary(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const std::uint64_t nodes = traj.snapshots.empty() ? 0 : traj.snapshots.front().size();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, traj.kind == Constraint::dirichlet ? 0u : 1u);
  put<std::uint32_t>(out, 0u);
  put<std::uint64_t>(out, nodes);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(traj.grid.steps));
  put<double>(out, traj.grid.T);
  for (const Field& u : traj.snapshots)
    for (Eigen::Index i = 0; i < u.size(); ++i) put<double>(out, u[i]);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Trajectory read_trajectory_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a trajectory file");
  const auto kind = get<std::uint32_t>(in);
  get<std::uint32_t>(in);
  const auto nodes = get<std::uint64_t>(in);
  const auto steps = get<std::uint64_t>(in);
  const double t_final = get<double>(in);
  if (kind > 1 || steps < 1 || steps > (1u << 30) || nodes > (1u << 30))
    throw std::runtime_error("corrupt trajectory header");
  Trajectory traj;
  traj.kind = kind == 0 ? Constraint::dirichlet : Constraint::neumann;
  traj.grid = TimeGrid(t_final, static_cast<int>(steps));
  traj.snapshots.assign(steps + 1, Field(static_cast<Eigen::Index>(nodes)));
  for (Field& u : traj.snapshots)
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = get<double>(in);
  return traj;
}

}  // namespace nlv

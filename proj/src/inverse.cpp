#include "nlv/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "nlv/io.hpp"
#include "nlv/parallel.hpp"

namespace nlv {

namespace {

int grid_step(const TimeGrid& grid, double t, const char* who) {
  const int k = static_cast<int>(std::lround(t / grid.dt()));
  if (k < 0 || k > grid.steps || std::abs(k * grid.dt() - t) > 1e-9 * grid.T)
    throw std::invalid_argument(std::string(who) + ": time " + format_double(t) + " is not a grid time");
  return k;
}

double mnorm(const SparseMatrix& m, const Field& u) { return std::sqrt(std::max(0.0, u.dot(m * u))); }

}  // namespace

BackwardResult backward_reconstruct(const BackwardProblem& p, StiffnessCache& cache, const TimeGrid& grid,
                                    const BackwardOptions& opts) {
  const Mesh& mesh = cache.mesh();
  const SparseMatrix& m = cache.mass();
  const int n = mesh.num_nodes();
  if (p.observed_T.size() != n) throw std::invalid_argument("backward_reconstruct: data size does not match the mesh");
  if (!p.observed_T.allFinite()) throw std::invalid_argument("backward_reconstruct: data has non-finite values");
  if (!(p.regularization > 0.0)) throw std::invalid_argument("backward_reconstruct: regularization must be positive");
  if (!(p.target_time >= 0.0 && p.target_time < grid.T))
    throw std::invalid_argument("backward_reconstruct: target time must lie in [0, T)");
  const int k0 = grid_step(grid, p.target_time, "backward_reconstruct");

  SolverOptions so;
  so.scheme = opts.scheme;
  Propagator prop(cache, Constraint::dirichlet, grid, so);
  const double rho = p.regularization;
  auto normal = [&](const Field& x) -> Field {
    Field y = prop.advance_adjoint(prop.advance(x, grid.steps), grid.steps);
    return y + rho * x;
  };

  BackwardResult res;
  const Field b = prop.advance_adjoint(p.observed_T, grid.steps);
  const double bnorm = mnorm(m, b);
  Field x = Field::Zero(n);
  if (bnorm > 0.0) {
    Field r = b;
    Field d = r;
    double rr = r.dot(m * r);
    res.residual_history.push_back(1.0);
    bool done = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const Field hd = normal(d);
      const double dhd = d.dot(m * hd);
      if (!(dhd > 0.0)) break;
      const double alpha = rr / dhd;
      x += alpha * d;
      r -= alpha * hd;
      const double rr_new = r.dot(m * r);
      res.iterations = it + 1;
      res.residual_history.push_back(std::sqrt(std::max(0.0, rr_new)) / bnorm);
      if (res.residual_history.back() <= opts.cg_tol) {
        done = true;
        break;
      }
      d = r + (rr_new / rr) * d;
      rr = rr_new;
    }
    if (!done) {
      std::ostringstream msg;
      msg << "backward_reconstruct: conjugate gradient stopped after " << res.iterations
          << " iterations at relative residual " << format_double(res.residual_history.back());
      throw ConvergenceError(msg.str(), res.residual_history);
    }
  }
  res.initial = x;
  res.at_target = prop.advance(x, k0);
  res.misfit = mnorm(m, prop.advance(x, grid.steps) - p.observed_T);
  res.penalty = mnorm(m, x);
  return res;
}

Field add_noise(const Field& v, double level, std::uint64_t seed) {
  if (level < 0.0) throw std::invalid_argument("add_noise: level must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = level * (v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
  Field out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += scale * gauss(rng);
  return out;
}

StabilityAudit stability_audit(const std::vector<Trajectory>& family, double t0, StiffnessCache& cache) {
  if (family.size() < 2) throw std::invalid_argument("stability_audit: need at least two members");
  const Mesh& mesh = cache.mesh();
  const SparseMatrix& m = cache.mass();
  const SparseMatrix m_omega = assemble_mass(mesh, Region::interior);
  const SparseMatrix h = m + assemble_seminorm(cache.spec().order, mesh, cache.options());
  const TimeGrid grid = family.front().grid;
  const int k0 = grid_step(grid, t0, "stability_audit");

  StabilityAudit audit;
  std::vector<double> xi, eta;
  for (const Trajectory& tr : family) {
    if (tr.grid.T != grid.T || tr.grid.steps != grid.steps || static_cast<int>(tr.snapshots.size()) != grid.count())
      throw std::invalid_argument("stability_audit: members must share one time grid");
    StabilityRow row;
    row.x = mnorm(m_omega, tr.at(k0));
    double y2 = 0.0;
    for (int k = 0; k < grid.count(); ++k) {
      const double wk = (k == 0 || k == grid.steps) ? 0.5 : 1.0;
      y2 += wk * grid.dt() * tr.at(k).dot(m * tr.at(k));
    }
    row.y = std::sqrt(std::max(0.0, y2));
    row.z = mnorm(h, tr.final());
    if (!(row.x > 0.0 && row.y > 0.0 && row.z > 0.0))
      throw std::invalid_argument("stability_audit: a member has a vanishing norm");
    row.log_rate = row.z < 1.0 ? row.y * std::sqrt(std::log(1.0 / row.z)) : std::numeric_limits<double>::quiet_NaN();
    xi.push_back(std::log(row.z) - std::log(row.y));
    eta.push_back(std::log(row.x) - std::log(row.y));
    audit.rows.push_back(row);
  }

  // log X - log Y = log C + theta (log Z - log Y)
  const int n = static_cast<int>(xi.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xi[i] / n;
    my += eta[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (xi[i] - mx) * (xi[i] - mx);
    sxy += (xi[i] - mx) * (eta[i] - my);
  }
  if (sxx <= 1e-20 * (1.0 + mx * mx) * n)
    throw std::invalid_argument("stability_audit: degenerate family, log(Z/Y) does not vary");
  audit.theta = sxy / sxx;
  const double log_c_fit = my - audit.theta * mx;
  audit.fit_constant = std::exp(log_c_fit);
  double log_c = -std::numeric_limits<double>::infinity();
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = eta[i] - audit.theta * xi[i];
    log_c = std::max(log_c, e);
    ss += (e - log_c_fit) * (e - log_c_fit);
  }
  audit.fit_residual = std::sqrt(ss / n);
  audit.constant = std::exp(log_c);
  for (int i = 0; i < n; ++i) {
    StabilityRow& row = audit.rows[i];
    row.slack = log_c + audit.theta * xi[i] - eta[i];
    if (row.slack < -1e-12) ++audit.violations;
    if (std::isfinite(row.log_rate)) audit.max_log_rate = std::max(audit.max_log_rate, row.log_rate);
  }
  return audit;
}

std::vector<Trajectory> eigenmode_family(StiffnessCache& cache, const TimeGrid& grid, int count, double min_decay) {
  const Mesh& mesh = cache.mesh();
  const std::vector<int> free = mesh.free_nodes();
  const int nf = static_cast<int>(free.size());
  if (nf == 0) throw std::invalid_argument("eigenmode_family: no free nodes");
  const Eigen::MatrixXd a(cache.at(0.0));
  const Eigen::MatrixXd m(cache.mass());
  Eigen::MatrixXd af(nf, nf), mf(nf, nf);
  for (int i = 0; i < nf; ++i)
    for (int j = 0; j < nf; ++j) {
      af(i, j) = a(free[i], free[j]);
      mf(i, j) = m(free[i], free[j]);
    }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(af, mf);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigenmode_family: eigensolver failed");
  std::vector<Trajectory> family;
  for (int k = 0; k < nf && static_cast<int>(family.size()) < count; ++k) {
    const double mu = es.eigenvalues()[k];
    if (mu * grid.T < min_decay) continue;
    Field phi = Field::Zero(mesh.num_nodes());
    for (int i = 0; i < nf; ++i) phi[free[i]] = es.eigenvectors()(i, k);
    phi /= mnorm(cache.mass(), phi);
    Trajectory tr;
    tr.grid = grid;
    tr.kind = Constraint::dirichlet;
    for (int s = 0; s < grid.count(); ++s) tr.snapshots.push_back(std::exp(-mu * grid.time(s)) * phi);
    family.push_back(std::move(tr));
  }
  if (static_cast<int>(family.size()) < count)
    throw std::invalid_argument("eigenmode_family: only " + std::to_string(family.size()) + " modes with mu T >= " +
                                format_double(min_decay));
  return family;
}

void write_stability_csv(const StabilityAudit& audit, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"member", "x", "y", "z", "slack", "log_rate"});
  for (std::size_t i = 0; i < audit.rows.size(); ++i) {
    const StabilityRow& r = audit.rows[i];
    w.field(i).field(r.x).field(r.y).field(r.z).field(r.slack).field(r.log_rate);
    w.end_row();
  }
}

SourceProblem separable_source_basis(double length, double width, double window, int space_modes,
                                     int time_modes) {
  if (!(length > 0.0 && width > 0.0 && window > 0.0) || space_modes < 1 || time_modes < 1)
    throw std::invalid_argument("separable_source_basis: invalid geometry or mode counts");
  SourceProblem p;
  p.length = length;
  p.width = width;
  p.window = window;
  for (int b = 0; b < time_modes; ++b)
    for (int a = 0; a < space_modes; ++a) {
      p.basis.push_back([=](const Point& x, double t) {
        return std::cos(a * std::numbers::pi * x[1] / width) * std::cos(b * std::numbers::pi * t / window);
      });
      p.labels.push_back("x" + std::to_string(a) + "_t" + std::to_string(b));
    }
  return p;
}

namespace {

void check_x1_independent(const SpaceTimeSource& f, const Mesh& mesh, double window, int j) {
  for (double t : {0.0, 0.5 * window, window}) {
    std::map<long long, std::pair<double, double>> range;
    double sup = 0.0;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      if (mesh.is_interaction_node(i)) continue;
      const double v = f(mesh.nodes[i], t);
      sup = std::max(sup, std::abs(v));
      const long long key = std::llround(mesh.nodes[i][1] * 1e9);
      auto [it, fresh] = range.try_emplace(key, v, v);
      if (!fresh) {
        it->second.first = std::min(it->second.first, v);
        it->second.second = std::max(it->second.second, v);
      }
    }
    for (const auto& [key, r] : range)
      if (r.second - r.first > 1e-8 * std::max(1.0, sup))
        throw std::invalid_argument("source_forward_map: basis source " + std::to_string(j) +
                                    " varies along x1");
  }
}

}  // namespace

SourceMap source_forward_map(const SourceProblem& p, const TimeGrid& grid, StiffnessCache& cache, Scheme scheme) {
  const Mesh& mesh = cache.mesh();
  const KernelSpec& spec = cache.spec();
  if (mesh.dim != 2 || spec.dim != 2) throw std::invalid_argument("source_forward_map: needs a 2-D mesh");
  if (!spec.order.is_constant) throw std::invalid_argument("source_forward_map: order must be constant");
  if (spec.tensor.name != "identity") throw std::invalid_argument("source_forward_map: tensor must be the identity");
  if (std::abs(grid.T - p.window) > 1e-12 * p.window)
    throw std::invalid_argument("source_forward_map: grid must end at the observation window");
  const double tol = 1e-9 * std::max(p.length, p.width);
  if (std::abs(mesh.omega.lo[0]) > tol || std::abs(mesh.omega.lo[1]) > tol ||
      std::abs(mesh.omega.hi[0] - p.length) > tol || std::abs(mesh.omega.hi[1] - p.width) > tol)
    throw std::invalid_argument("source_forward_map: mesh does not cover (0, length) x (0, width)");
  Point lo = mesh.nodes.front(), hi = mesh.nodes.front();
  for (const Point& x : mesh.nodes)
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  const double diam = std::hypot(hi[0] - lo[0], hi[1] - lo[1]);
  if (spec.horizon < diam)
    throw std::invalid_argument("source_forward_map: horizon " + format_double(spec.horizon) +
                                " does not cover the mesh diameter " + format_double(diam));
  if (p.basis.empty()) throw std::invalid_argument("source_forward_map: empty basis");
  for (std::size_t j = 0; j < p.basis.size(); ++j) check_x1_independent(p.basis[j], mesh, p.window, static_cast<int>(j));

  SourceMap map;
  map.horizon = spec.horizon;
  map.trace_nodes = mesh.interaction_nodes();
  for (int k = 1; k <= grid.steps; ++k) map.trace_steps.push_back(k);
  const int nt = static_cast<int>(map.trace_nodes.size());
  const int cols = static_cast<int>(p.basis.size());
  map.g.setZero(static_cast<Eigen::Index>(nt) * grid.steps, cols);

  cache.at(0.0);  // assembled once, read-only afterwards
  SolverOptions so;
  so.scheme = scheme;
  so.source_region = Region::interior;
  const int n = mesh.num_nodes();
  parallel_chunks(cols, [&](int, int begin, int end) {
    Propagator prop(cache, Constraint::neumann, grid, so);
    for (int j = begin; j < end; ++j) {
      const SpaceTimeSource& fj = p.basis[j];
      const Source src = [&, fj](double t) {
        Field v(n);
        for (int i = 0; i < n; ++i) v[i] = mesh.is_interaction_node(i) ? 0.0 : fj(mesh.nodes[i], t);
        return v;
      };
      const Trajectory tr = prop.run(Field::Zero(n), src);
      for (int s = 0; s < grid.steps; ++s)
        for (int q = 0; q < nt; ++q) map.g(static_cast<Eigen::Index>(s) * nt + q, j) = tr.at(s + 1)[map.trace_nodes[q]];
    }
  });

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map.g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  map.u = svd.matrixU();
  map.v = svd.matrixV();
  map.singular_values = svd.singularValues();
  map.sigma_max = map.singular_values.size() ? map.singular_values[0] : 0.0;
  map.sigma_min = map.singular_values.size() ? map.singular_values[map.singular_values.size() - 1] : 0.0;
  map.condition = map.sigma_min > 0.0 ? map.sigma_max / map.sigma_min : std::numeric_limits<double>::infinity();
  const double cut = std::max(map.g.rows(), map.g.cols()) * std::numeric_limits<double>::epsilon() * map.sigma_max;
  for (Eigen::Index i = 0; i < map.singular_values.size(); ++i)
    if (map.singular_values[i] > cut) ++map.rank;
  return map;
}

SourceFit source_reconstruct(const Eigen::VectorXd& data, const SourceMap& map, int truncation) {
  if (data.size() != map.g.rows()) throw std::invalid_argument("source_reconstruct: data size does not match the map");
  if (truncation < 1 || truncation > map.rank)
    throw std::invalid_argument("source_reconstruct: truncation " + std::to_string(truncation) +
                                " outside [1, " + std::to_string(map.rank) + "]");
  SourceFit fit;
  fit.truncation = truncation;
  const Eigen::VectorXd proj = map.u.leftCols(truncation).transpose() * data;
  fit.coefficients =
      map.v.leftCols(truncation) * proj.cwiseQuotient(map.singular_values.head(truncation));
  const double dn = data.norm();
  fit.residual = dn > 0.0 ? (map.g * fit.coefficients - data).norm() / dn : 0.0;
  return fit;
}

void write_source_map_csv(const SourceMap& map, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"index", "singular_value"});
  for (Eigen::Index i = 0; i < map.singular_values.size(); ++i) {
    w.field(static_cast<long long>(i)).field(map.singular_values[i]);
    w.end_row();
  }
}

}  // namespace nlv

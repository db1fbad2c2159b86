#include "nlv/calculus.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "nlv/io.hpp"
#include "nlv/parallel.hpp"
#include "nlv/simd/kernels.hpp"

namespace nlv {

double interpolate(const Mesh& mesh, const Field& u, int elem, const Bary& bary) {
  double s = 0.0;
  for (int k = 0; k <= mesh.dim; ++k) s += bary[k] * u[mesh.elements[elem][k]];
  return s;
}

double evaluate(const Mesh& mesh, const Field& u, const Point& x) {
  const auto loc = locate(mesh, x);
  if (!loc) throw std::out_of_range("evaluate: point outside the mesh");
  return interpolate(mesh, u, loc->first, loc->second);
}

std::vector<std::pair<int, int>> interacting_pairs(const Mesh& mesh, std::optional<double> horizon) {
  std::vector<std::pair<int, int>> pairs;
  const int n = mesh.num_elements();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (pair_interacts(mesh, i, j, horizon)) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<double> reduce_pairs(const Mesh& mesh, std::optional<double> horizon, const QuadratureOptions& opts,
                                 int count, const std::function<void(const PairSample&, double*)>& body) {
  const auto pairs = interacting_pairs(mesh, horizon);
  const int n = static_cast<int>(pairs.size());
  const int chunks = chunk_count(n);
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(count, 0.0));
  parallel_chunks(n, [&](int c, int begin, int end) {
    double* acc = partial[c].data();
    for (int p = begin; p < end; ++p) {
      const auto [e1, e2] = pairs[p];
      const PairRule rule = pair_rule(mesh, e1, e2, horizon, opts);
      // The identical-pair rule already covers K x K once; halving it and
      // adding the swap keeps the measure exactly symmetric.
      const double f = e1 == e2 ? 0.5 : 1.0;
      for (const auto& q : rule.points) {
        body(PairSample{q.x, q.y, f * q.w, e1, e2, q.bx, q.by}, acc);
        body(PairSample{q.y, q.x, f * q.w, e2, e1, q.by, q.bx}, acc);
      }
    }
  });
  std::vector<double> total(count, 0.0);
  for (const auto& part : partial)
    for (int k = 0; k < count; ++k) total[k] += part[k];
  return total;
}

SparseMatrix assemble_pair_form(const Mesh& mesh, const PairKernel& k, std::optional<double> horizon,
                                const QuadratureOptions& opts) {
  using Triplet = Eigen::Triplet<double>;
  const auto pairs = interacting_pairs(mesh, horizon);
  const int n = static_cast<int>(pairs.size());
  const int chunks = chunk_count(n);
  std::vector<std::vector<Triplet>> partial(chunks);
  const int nv = mesh.dim + 1;

  parallel_chunks(n, [&](int c, int begin, int end) {
    auto& out = partial[c];
    std::vector<double> wk;
    std::array<std::vector<double>, 6> rows;
    std::array<double, 36> gram{};
    for (int p = begin; p < end; ++p) {
      const auto [e1, e2] = pairs[p];
      const PairRule rule = pair_rule(mesh, e1, e2, horizon, opts);
      // Local numbering: vertices of e1, then the vertices of e2 not in e1.
      std::array<int, 6> node{};
      std::array<int, 3> slot1{};
      std::array<int, 3> slot2{};
      int m = 0;
      for (int a = 0; a < nv; ++a) {
        slot1[a] = m;
        node[m++] = mesh.elements[e1][a];
      }
      for (int b = 0; b < nv; ++b) {
        const int g = mesh.elements[e2][b];
        int s = -1;
        for (int l = 0; l < m; ++l)
          if (node[l] == g) s = l;
        if (s < 0) {
          s = m;
          node[m++] = g;
        }
        slot2[b] = s;
      }
      const std::size_t nq = rule.points.size();
      wk.resize(nq);
      for (int l = 0; l < m; ++l) rows[l].assign(nq, 0.0);
      for (std::size_t q = 0; q < nq; ++q) {
        const QuadPoint& pt = rule.points[q];
        wk[q] = pt.w * k(pt.x, pt.y);
        for (int b = 0; b < nv; ++b) rows[slot2[b]][q] += pt.by[b];
        for (int a = 0; a < nv; ++a) rows[slot1[a]][q] -= pt.bx[a];
      }
      std::array<const double*, 6> ptrs{};
      for (int l = 0; l < m; ++l) ptrs[l] = rows[l].data();
      std::fill(gram.begin(), gram.end(), 0.0);
      simd::weighted_gram(wk, ptrs.data(), m, gram.data());
      // (e1, e2) and (e2, e1) contribute equally for a symmetric kernel.
      const double f = e1 == e2 ? 1.0 : 2.0;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) out.emplace_back(node[i], node[j], f * gram[i * m + j]);
    }
  });

  std::vector<Triplet> all;
  std::size_t total = 0;
  for (const auto& part : partial) total += part.size();
  all.reserve(total);
  for (const auto& part : partial) all.insert(all.end(), part.begin(), part.end());
  SparseMatrix a(mesh.num_nodes(), mesh.num_nodes());
  a.setFromTriplets(all.begin(), all.end());
  a.makeCompressed();
  return a;
}

SparseMatrix assemble_mass(const Mesh& mesh, std::optional<Region> region) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> t;
  const int nv = mesh.dim + 1;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (region && mesh.region[e] != *region) continue;
    const double meas = mesh.measure(e);
    // exact P1 mass: |K| (1 + delta_ij) / ((n+1)(n+2))
    const double base = meas / ((mesh.dim + 1.0) * (mesh.dim + 2.0));
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b)
        t.emplace_back(mesh.elements[e][a], mesh.elements[e][b], base * (a == b ? 2.0 : 1.0));
  }
  SparseMatrix m(mesh.num_nodes(), mesh.num_nodes());
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

namespace {

KernelSpec symmetrized(KernelSpec spec) {
  spec.symmetrize = true;
  return spec;
}

}  // namespace

StiffnessOperator assemble_stiffness(double t, const KernelSpec& spec, const Mesh& mesh,
                                     const QuadratureOptions& opts) {
  const KernelSpec s = symmetrized(spec);
  auto k = [&s, t](const Point& x, const Point& y) { return eval_gamma(t, x, y, s); };
  return StiffnessOperator{assemble_pair_form(mesh, k, spec.horizon, opts), t};
}

StiffnessCache::StiffnessCache(KernelSpec spec, const Mesh& mesh, QuadratureOptions opts)
    : spec_(std::move(spec)), mesh_(&mesh), opts_(opts), mass_(assemble_mass(mesh)) {}

const SparseMatrix& StiffnessCache::at(double t) {
  if (spec_.tensor.time_independent) {
    if (!has_base_) {
      base_ = assemble_stiffness(0.0, spec_, *mesh_, opts_).matrix;
      has_base_ = true;
    }
    return base_;
  }
  if (current_t_ && *current_t_ == t) return current_;
  if (spec_.tensor.time_scale) {
    if (!has_base_) {
      base_ = assemble_stiffness(0.0, spec_, *mesh_, opts_).matrix;
      has_base_ = true;
    }
    current_ = base_ * (spec_.tensor.time_scale(t) / spec_.tensor.time_scale(0.0));
  } else {
    current_ = assemble_stiffness(t, spec_, *mesh_, opts_).matrix;
  }
  current_t_ = t;
  return current_;
}

Vec2 apply_adjoint(const Mesh& mesh, const Field& u, const Point& x, const Point& y, const KernelSpec& spec) {
  const Vec2 a = eval_alpha(x, y, spec);
  const double du = evaluate(mesh, u, y) - evaluate(mesh, u, x);
  return {-du * a[0], -du * a[1]};
}

namespace {

Vec2 alpha_for(const Point& x, const Point& y, const KernelSpec& spec) {
  return spec.symmetrize ? eval_alpha_antisym(x, y, spec) : eval_alpha(x, y, spec);
}

double dot2(const Vec2& a, const Vec2& b, int dim) { return dim == 1 ? a[0] * b[0] : a[0] * b[0] + a[1] * b[1]; }

// u(y) - u(x) for a point sample; exact differencing inside the host element.
double sample_difference(const Mesh& mesh, const Field& u, const PointSample& s, double ux) {
  if (s.host) {
    double d = 0.0;
    for (int k = 0; k <= mesh.dim; ++k) d += s.dbary[k] * u[mesh.elements[s.elem][k]];
    return d;
  }
  return interpolate(mesh, u, s.elem, s.bary) - ux;
}

// int (u(y) - u(x)) k(x, y) dy over the point rule.
double weighted_difference_integral(const Field& u, const Point& x, const Mesh& mesh, double horizon,
                                    const QuadratureOptions& opts,
                                    const std::function<double(const Point&)>& k) {
  const double ux = evaluate(mesh, u, x);
  double s = 0.0;
  for (const auto& p : point_rule(mesh, x, horizon, opts)) {
    const double kv = k(p.y);
    if (kv == 0.0) continue;
    s += p.w * sample_difference(mesh, u, p, ux) * kv;
  }
  return s;
}

}  // namespace

double apply_divergence(const TwoPointField& nu, const Point& x, const KernelSpec& spec, const Mesh& mesh,
                        const QuadratureOptions& opts) {
  double s = 0.0;
  for (const auto& p : point_rule(mesh, x, spec.horizon, opts)) {
    const Vec2 a = alpha_for(x, p.y, spec);
    const Vec2 n1 = nu(x, p.y);
    const Vec2 n2 = nu(p.y, x);
    s += p.w * dot2({n1[0] + n2[0], n1[1] + n2[1]}, a, spec.dim);
  }
  return s;
}

double diffusion_at(const Field& u, double t, const Point& x, const KernelSpec& spec, const Mesh& mesh,
                    const QuadratureOptions& opts) {
  const KernelSpec s = symmetrized(spec);
  return -2.0 * weighted_difference_integral(u, x, mesh, spec.horizon, opts,
                                             [&](const Point& y) { return eval_gamma(t, x, y, s); });
}

double apply_interaction(const Field& u, double t, const Point& x, const KernelSpec& spec, const Mesh& mesh,
                         const QuadratureOptions& opts) {
  const auto loc = locate(mesh, x);
  if (!loc) throw std::out_of_range("apply_interaction: point outside the mesh");
  // The layer is taken closed, so points on the boundary of Omega belong to it.
  bool in_layer = false;
  for (int e = 0; e < mesh.num_elements() && !in_layer; ++e) {
    if (mesh.region[e] != Region::interaction) continue;
    const Bary b = mesh.barycentric(e, x);
    if (std::min({b[0], b[1], mesh.dim == 1 ? 0.0 : b[2]}) >= -1e-12) in_layer = true;
  }
  if (!in_layer) throw std::invalid_argument("apply_interaction: point is not in the interaction layer");
  if (spec.symmetrize) return -diffusion_at(u, t, x, spec, mesh, opts);
  // Literal: -int (nu(x,y) + nu(y,x)) . alpha(x,y) dy with nu = a D* u.
  return weighted_difference_integral(u, x, mesh, spec.horizon, opts, [&](const Point& y) {
    const Vec2 axy = eval_alpha(x, y, spec);
    const Vec2 ayx = eval_alpha(y, x, spec);
    const Mat2 a = spec.tensor.eval(t, x, y);
    const double d0 = axy[0] - ayx[0];
    const double d1 = axy[1] - ayx[1];
    if (spec.dim == 1) return d0 * a[0] * axy[0];
    return d0 * (a[0] * axy[0] + a[1] * axy[1]) + d1 * (a[2] * axy[0] + a[3] * axy[1]);
  });
}

struct DiffusionOperator::Solver {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
};

DiffusionOperator::DiffusionOperator(StiffnessCache& cache) : cache_(&cache), solver_(std::make_shared<Solver>()) {
  solver_->ldlt.compute(cache.mass());
  if (solver_->ldlt.info() != Eigen::Success) throw std::runtime_error("mass matrix factorization failed");
}

Field DiffusionOperator::apply(const Field& u, double t) {
  if (u.size() != cache_->mesh().num_nodes()) throw std::invalid_argument("apply_diffusion: field size mismatch");
  const Field au = cache_->at(t) * u;
  return solver_->ldlt.solve(au);
}

Field apply_diffusion(const Field& u, double t, const KernelSpec& spec, const Mesh& mesh,
                      const QuadratureOptions& opts) {
  StiffnessCache cache(spec, mesh, opts);
  DiffusionOperator op(cache);
  return op.apply(u, t);
}

TwoPointField flux_field(const Field& u, double t, const KernelSpec& spec, const Mesh& mesh) {
  return [&u, t, spec, &mesh](const Point& x, const Point& y) {
    const Vec2 a = alpha_for(x, y, spec);
    const Mat2 m = spec.tensor.eval(t, x, y);
    const double du = evaluate(mesh, u, y) - evaluate(mesh, u, x);
    if (spec.dim == 1) return Vec2{-du * m[0] * a[0], 0.0};
    return Vec2{-du * (m[0] * a[0] + m[1] * a[1]), -du * (m[2] * a[0] + m[3] * a[1])};
  };
}

GaussResidual gauss_residual(const TwoPointField& nu, const KernelSpec& spec, const Mesh& mesh,
                             const QuadratureOptions& opts) {
  const auto sums = reduce_pairs(mesh, spec.horizon, opts, 2, [&](const PairSample& s, double* acc) {
    const Vec2 a = alpha_for(s.x, s.y, spec);
    if (a[0] == 0.0 && a[1] == 0.0) return;
    const Vec2 n1 = nu(s.x, s.y);
    const Vec2 n2 = nu(s.y, s.x);
    const double v = s.w * dot2({n1[0] + n2[0], n1[1] + n2[1]}, a, spec.dim);
    if (mesh.region[s.ex] == Region::interior)
      acc[0] += v;
    else
      acc[1] -= v;
  });
  return GaussResidual{sums[0], sums[1], std::abs(sums[0] - sums[1])};
}

GreenResidual green_residual(const Field& u, const Field& v, double t, const KernelSpec& spec, const Mesh& mesh,
                             const QuadratureOptions& opts) {
  const auto sums = reduce_pairs(mesh, spec.horizon, opts, 3, [&](const PairSample& s, double* acc) {
    const double ux = interpolate(mesh, u, s.ex, s.bx);
    const double du = interpolate(mesh, u, s.ey, s.by) - ux;
    const double vx = interpolate(mesh, v, s.ex, s.bx);
    const double dv = interpolate(mesh, v, s.ey, s.by) - vx;
    double strong = 0.0;  // integrand of D(a D* u)(x)
    double form = 0.0;    // integrand of D* v . a D* u
    if (spec.symmetrize) {
      const double g = eval_gamma(t, s.x, s.y, spec);
      strong = -2.0 * du * g;
      form = du * dv * g;
    } else {
      const Vec2 axy = eval_alpha(s.x, s.y, spec);
      const Vec2 ayx = eval_alpha(s.y, s.x, spec);
      const Mat2 a = spec.tensor.eval(t, s.x, s.y);
      const Vec2 aa{a[0] * axy[0] + a[1] * axy[1], a[2] * axy[0] + a[3] * axy[1]};
      strong = -du * dot2({axy[0] - ayx[0], axy[1] - ayx[1]}, aa, spec.dim);
      form = du * dv * dot2(axy, aa, spec.dim);
    }
    acc[1] += s.w * form;
    if (mesh.region[s.ex] == Region::interior)
      acc[0] += s.w * vx * strong;
    else
      acc[2] -= s.w * vx * strong;
  });
  GreenResidual r;
  r.volume = sums[0];
  r.form = sums[1];
  r.flux = sums[2];
  r.residual = std::abs(r.volume - r.form - r.flux);
  r.scale = std::max({std::abs(r.volume), std::abs(r.form), std::abs(r.flux)});
  return r;
}

void write_coo(const SparseMatrix& a, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"row", "col", "value"});
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      w.field(static_cast<long long>(it.row())).field(static_cast<long long>(it.col())).field(it.value());
      w.end_row();
    }
}

}  // namespace nlv

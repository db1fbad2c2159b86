#include "nlv/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nlv/io.hpp"

namespace nlv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quad(const SparseMatrix& a, const Field& u) { return std::max(0.0, u.dot(a * u)); }

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : -kInf; }

}  // namespace

CarlemanWeight::CarlemanWeight(double l, double s_, int sg) : lambda(l), s(s_), sign(sg) {
  if (!(l > 0.0) || !(s_ > 0.0)) throw std::invalid_argument("Carleman weight: lambda and s must be positive");
  if (sg != 1 && sg != -1) throw std::invalid_argument("Carleman weight: sign must be +1 or -1");
}

double weight_eval(const CarlemanWeight& w, double t) { return std::exp(w.sign * w.lambda * t); }

std::string to_string(CarlemanVariant v) { return v == CarlemanVariant::forward ? "forward" : "terminal"; }

CarlemanVariant carleman_variant_from_string(const std::string& s) {
  if (s == "forward") return CarlemanVariant::forward;
  if (s == "terminal") return CarlemanVariant::terminal;
  throw std::invalid_argument("unknown Carleman variant: " + s);
}

CarlemanProfile carleman_profile(const Trajectory& traj, const Source& f, CarlemanVariant variant,
                                 StiffnessCache& cache, double tol) {
  const Mesh& mesh = cache.mesh();
  const SparseMatrix& m = cache.mass();
  const SparseMatrix m_omega = assemble_mass(mesh, Region::interior);
  const SparseMatrix m_layer = assemble_mass(mesh, Region::interaction);
  const SparseMatrix s = assemble_seminorm(cache.spec().order, mesh, cache.options());
  const Field lumped_layer = m_layer * Field::Ones(mesh.num_nodes());
  const TimeGrid& grid = traj.grid;

  double largest = 0.0;
  for (const Field& u : traj.snapshots) largest = std::max(largest, u.cwiseAbs().maxCoeff());
  if (variant == CarlemanVariant::terminal) {
    if (traj.final().cwiseAbs().maxCoeff() > tol * largest)
      throw std::invalid_argument("carleman_terms: terminal variant needs u(T) = 0");
  } else if (traj.kind == Constraint::dirichlet) {
    for (const Field& u : traj.snapshots)
      for (int i = 0; i < mesh.num_nodes(); ++i)
        if (mesh.in_layer_closure(i) && std::abs(u[i]) > tol * largest)
          throw std::invalid_argument("carleman_terms: forward variant needs u = 0 on the interaction layer");
  }

  DiffusionOperator op(cache);
  const std::vector<Field> ut = time_derivative(traj.snapshots, grid);
  CarlemanProfile p;
  p.grid = grid;
  p.variant = variant;
  double gap2 = 0.0;
  for (int k = 0; k < grid.count(); ++k) {
    const Field& u = traj.at(k);
    const double t = grid.time(k);
    const Field du = op.apply(u, t);
    const Field lu = ut[k] + du;
    p.dt_sq.push_back(quad(m_omega, ut[k]));
    p.diff_sq.push_back(quad(m_omega, du));
    p.l2_sq.push_back(quad(m_omega, u));
    p.semi_sq.push_back(quad(s, u));
    Field fv;
    if (f) fv = f(t);
    p.residual_sq.push_back(f ? quad(m, fv) : 0.0);
    double inter = 0.0;
    if (variant == CarlemanVariant::terminal) {
      // N = -D on the layer; lumped layer mass for the nonsmooth product.
      for (int i = 0; i < mesh.num_nodes(); ++i)
        inter += lumped_layer[i] * (std::abs(u[i]) + std::abs(ut[k][i])) * std::abs(du[i]);
    }
    p.interaction.push_back(inter);
    {
      const Field r = f ? Field(lu - fv) : lu;
      gap2 += ((k == 0 || k == grid.steps) ? 0.5 : 1.0) * grid.dt() * quad(m_omega, r);
    }
  }
  p.source_gap = std::sqrt(gap2);
  auto hnorm2 = [&](const Field& u) { return quad(m, u) + quad(s, u); };
  p.boundary = hnorm2(traj.at(0));
  if (variant == CarlemanVariant::forward) p.boundary += hnorm2(traj.final());
  return p;
}

CarlemanReport carleman_terms(const CarlemanProfile& p, const CarlemanWeight& w) {
  const TimeGrid& g = p.grid;
  CarlemanReport r;
  r.weight = w;
  r.log_scale = -kInf;
  for (int k = 0; k < g.count(); ++k) r.log_scale = std::max(r.log_scale, 2.0 * w.s * weight_eval(w, g.time(k)));
  for (int k = 0; k < g.count(); ++k) {
    const double phi = weight_eval(w, g.time(k));
    const double tau = ((k == 0 || k == g.steps) ? 0.5 : 1.0) * g.dt();
    const double e = tau * std::exp(2.0 * w.s * phi - r.log_scale);
    r.lhs_dt += e * p.dt_sq[k] / (w.s * phi);
    r.lhs_diff += e * p.diff_sq[k] / (w.s * phi);
    r.lhs_l2 += e * w.s * w.lambda * w.lambda * phi * p.l2_sq[k];
    r.lhs_semi += e * w.lambda * p.semi_sq[k];
    r.rhs_source += e * p.residual_sq[k];
    r.rhs_interaction += e * w.s * w.lambda * p.interaction[k];
  }
  r.rhs_boundary = p.boundary;
  return r;
}

CarlemanReport carleman_terms(const Trajectory& traj, const Source& f, const CarlemanWeight& w,
                              CarlemanVariant variant, StiffnessCache& cache) {
  return carleman_terms(carleman_profile(traj, f, variant, cache), w);
}

double CarlemanReport::log_ratio(double k) const {
  const double num = lhs();
  if (num == 0.0) return -kInf;
  // Everything in units of exp(log_scale).
  const double den = log_add(safe_log(rhs_source + rhs_interaction), k * weight.s + safe_log(rhs_boundary) - log_scale);
  if (den == -kInf) return kInf;
  return std::log(num) - den;
}

double CarlemanReport::ratio(double k) const {
  const double lr = log_ratio(k);
  return lr == -kInf ? 0.0 : std::exp(lr);
}

Certificate certify(const std::vector<CarlemanProfile>& suite, const CertifyOptions& opts) {
  Certificate cert;
  if (suite.empty()) throw std::invalid_argument("certify: empty suite");
  const auto& lam = opts.lambdas;
  const auto& ss = opts.ss;
  if (lam.empty() || ss.empty()) throw std::invalid_argument("certify: empty parameter grid");
  if (!std::is_sorted(lam.begin(), lam.end()) || !std::is_sorted(ss.begin(), ss.end()))
    throw std::invalid_argument("certify: grids must be increasing");
  const int nl = static_cast<int>(lam.size());
  const int ns = static_cast<int>(ss.size());
  const int nm = static_cast<int>(suite.size());
  const int sign = suite.front().variant == CarlemanVariant::forward ? 1 : -1;

  std::vector<CarlemanReport> reports(static_cast<std::size_t>(nl) * ns * nm);
  auto at = [&](int i, int j, int m) -> CarlemanReport& { return reports[(static_cast<std::size_t>(i) * ns + j) * nm + m]; };
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < ns; ++j)
      for (int m = 0; m < nm; ++m) at(i, j, m) = carleman_terms(suite[m], CarlemanWeight(lam[i], ss[j], sign));

  // Exponent of the boundary factor: pooled within-member slope of log(LHS / B) in s.
  cert.k.assign(nl, 0.0);
  for (int i = 0; i < nl; ++i) {
    double sxy = 0.0, sxx = 0.0;
    for (int m = 0; m < nm; ++m) {
      std::vector<double> xs, ys;
      for (int j = 0; j < ns; ++j) {
        const CarlemanReport& r = at(i, j, m);
        if (r.lhs() > 0.0 && r.rhs_boundary > 0.0) {
          xs.push_back(ss[j]);
          ys.push_back(std::log(r.lhs()) + r.log_scale - std::log(r.rhs_boundary));
        }
      }
      if (xs.size() < 2) continue;
      double mx = 0.0, my = 0.0;
      for (std::size_t q = 0; q < xs.size(); ++q) {
        mx += xs[q];
        my += ys[q];
      }
      mx /= xs.size();
      my /= xs.size();
      for (std::size_t q = 0; q < xs.size(); ++q) {
        sxy += (xs[q] - mx) * (ys[q] - my);
        sxx += (xs[q] - mx) * (xs[q] - mx);
      }
    }
    cert.k[i] = sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0;
  }

  cert.c_grid.assign(nl, std::vector<double>(ns, 0.0));
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < ns; ++j)
      for (int m = 0; m < nm; ++m) {
        const double r = at(i, j, m).ratio(cert.k[i]);
        cert.rows.push_back({i, j, m, at(i, j, m), r});
        const double& c = cert.c_grid[i][j];
        cert.c_grid[i][j] = (std::isnan(r) || std::isnan(c)) ? std::nan("") : std::max(c, r);
      }

  auto spread = [&](int i, int j0) {
    double lo = kInf, hi = 0.0;
    for (int j = j0; j < ns; ++j) {
      lo = std::min(lo, cert.c_grid[i][j]);
      hi = std::max(hi, cert.c_grid[i][j]);
    }
    if (hi == 0.0) return 1.0;
    return lo > 0.0 ? hi / lo : kInf;
  };
  const int top = ns / 2;
  for (int i = 0; i < nl; ++i) cert.top_half_stability = std::max(cert.top_half_stability, spread(i, top));

  for (int i = 0; i < nl && !cert.certified; ++i) {
    for (int j = 0; j + std::max(1, opts.min_s_points) <= ns && !cert.certified; ++j) {
      bool ok = true;
      double c = 0.0, stab = 1.0;
      for (int a = i; a < nl && ok; ++a) {
        for (int b = j; b < ns; ++b) {
          if (!std::isfinite(cert.c_grid[a][b])) ok = false;
          else c = std::max(c, cert.c_grid[a][b]);
        }
        if (ok) {
          const double sp = spread(a, j);
          stab = std::max(stab, sp);
          if (!(sp <= opts.stability_limit)) ok = false;
        }
      }
      if (ok) {
        cert.certified = true;
        cert.lambda0 = i;
        cert.s0 = j;
        cert.constant = c;
        cert.stability = stab;
      }
    }
  }
  cert.message = cert.certified ? "certified" : "no admissible (lambda, s) region: ratios are not finite or not stable in s";
  return cert;
}

void write_certificate_csv(const Certificate& cert, const CertifyOptions& opts, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"lambda", "s", "member", "log_scale", "lhs_dt", "lhs_diff", "lhs_l2", "lhs_semi", "rhs_source",
            "rhs_interaction", "rhs_boundary", "k", "ratio"});
  for (const auto& row : cert.rows) {
    const auto& r = row.report;
    w.field(opts.lambdas[row.lambda_index]).field(opts.ss[row.s_index]).field(row.member);
    w.field(r.log_scale).field(r.lhs_dt).field(r.lhs_diff).field(r.lhs_l2).field(r.lhs_semi);
    w.field(r.rhs_source).field(r.rhs_interaction).field(r.rhs_boundary);
    w.field(cert.k[row.lambda_index]).field(row.ratio);
    w.end_row();
  }
}

std::string certificate_summary(const Certificate& cert, const CertifyOptions& opts) {
  std::ostringstream out;
  out << "certified: " << (cert.certified ? "true" : "false") << "\n";
  if (cert.certified) {
    out << "lambda0: " << format_double(opts.lambdas[cert.lambda0]) << "\n";
    out << "s0: " << format_double(opts.ss[cert.s0]) << "\n";
  }
  out << "C: " << format_double(cert.constant) << "\n";
  out << "K:";
  for (std::size_t i = 0; i < cert.k.size(); ++i)
    out << " " << format_double(opts.lambdas[i]) << "=" << format_double(cert.k[i]);
  out << "\n";
  out << "stability: " << format_double(cert.stability) << "\n";
  out << "top_half_stability: " << format_double(cert.top_half_stability) << "\n";
  out << "message: " << cert.message << "\n";
  return out.str();
}

}  // namespace nlv

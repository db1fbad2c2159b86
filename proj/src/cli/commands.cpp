#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "nlv/carleman.hpp"
#include "nlv/cli/manifest.hpp"
#include "nlv/cli/run.hpp"
#include "nlv/inverse.hpp"
#include "nlv/io.hpp"
#include "nlv/parallel.hpp"
#include "nlv/svg.hpp"

namespace nlv::cli {

namespace fs = std::filesystem;

namespace {

class Context {
 public:
  Context(const ExperimentConfig& cfg, fs::path out) : cfg(cfg), out_(std::move(out)) {}

  fs::path file(const std::string& name) {
    result.files.push_back(name);
    return out_ / name;
  }

  void expect(const std::string& name, bool ok, const std::string& detail) {
    result.summary["invariants"][name] = {{"pass", ok}, {"detail", detail}};
    if (!ok) result.failed.push_back(name);
  }

  Section section(const std::string& key) const {
    const auto it = cfg.doc->root.find(key);
    return Section(it == cfg.doc->root.end() ? nullptr : &*it, "/" + key, cfg.doc);
  }
  Section root() const { return Section(&cfg.doc->root, "", cfg.doc); }

  const ExperimentConfig& cfg;
  RunResult result;

 private:
  fs::path out_;
};

std::string fmt(double v) { return format_double(v); }

double mnorm(const SparseMatrix& m, const Field& u) { return std::sqrt(std::max(0.0, u.dot(m * u))); }

// Smooth bump supported inside the interior box, zero near its boundary.
Field interior_bump(const Mesh& m) {
  Field u = Field::Zero(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) {
    double v = 1.0;
    for (int d = 0; d < m.dim; ++d) {
      const double t = (m.nodes[i][d] - m.omega.lo[d]) / (m.omega.hi[d] - m.omega.lo[d]);
      v *= (t > 0.1 && t < 0.9) ? std::pow(std::sin(std::numbers::pi * (t - 0.1) / 0.8), 2) : 0.0;
    }
    u[i] = v * (1.0 + 0.5 * m.nodes[i][0]);
  }
  return u;
}

void require_constraint(const Context& ctx, Constraint want, const std::string& command) {
  if (ctx.cfg.constraint != want)
    ctx.section("solver").fail("constraint", command + " needs the " + to_string(want) + " constraint");
}

// ---------------------------------------------------------------------------

void verify_calculus(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Section e = cfg.experiment_section();
  e.only({"fields", "tolerance", "structure_tolerance"});
  const int fields = e.integer_in("fields", 50, 1, 100000);
  const double tol = e.number_in("tolerance", 1e-6, 0.0, 1.0, true);
  const double stol = e.number_in("structure_tolerance", 1e-10, 0.0, 1.0, true);

  const Mesh m = cfg.build_mesh();
  const KernelSpec& spec = cfg.spec;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto random_field = [&] {
    Field u(m.num_nodes());
    for (int i = 0; i < m.num_nodes(); ++i) u[i] = uni(rng);
    return u;
  };

  CsvWriter w(ctx.file("calculus_residuals.csv"));
  w.header({"field", "gauss_divergence", "gauss_flux", "gauss_relative", "green_volume", "green_form", "green_flux",
            "green_relative", "adjoint_volume", "adjoint_form", "adjoint_relative"});
  double worst_gauss = 0.0, worst_green = 0.0, worst_adj = 0.0;
  Series sg{"gauss", {}, {}, true}, sr{"green", {}, {}, true}, sa{"adjoint", {}, {}, true};
  for (int k = 0; k < fields; ++k) {
    const Field u = random_field();
    const Field v = random_field();
    Field vd = v;
    for (int i = 0; i < m.num_nodes(); ++i)
      if (m.in_layer_closure(i)) vd[i] = 0.0;
    const GaussResidual ga = gauss_residual(flux_field(u, 0.0, spec, m), spec, m, cfg.quad);
    const GreenResidual gr = green_residual(u, v, 0.0, spec, m, cfg.quad);
    const GreenResidual ad = green_residual(u, vd, 0.0, spec, m, cfg.quad);
    const double gscale = std::max({std::abs(ga.divergence), std::abs(ga.flux), 1e-300});
    const double g_rel = ga.residual / gscale;
    const double r_rel = gr.scale > 0.0 ? gr.residual / gr.scale : 0.0;
    const double ascale = std::max({std::abs(ad.volume), std::abs(ad.form), 1e-300});
    const double a_rel = std::abs(ad.volume - ad.form) / ascale;
    worst_gauss = std::max(worst_gauss, g_rel);
    worst_green = std::max(worst_green, r_rel);
    worst_adj = std::max(worst_adj, a_rel);
    w.field(k).field(ga.divergence).field(ga.flux).field(g_rel).field(gr.volume).field(gr.form).field(gr.flux)
        .field(r_rel).field(ad.volume).field(ad.form).field(a_rel);
    w.end_row();
    for (Series* s : {&sg, &sr, &sa}) s->x.push_back(k);
    sg.y.push_back(g_rel);
    sr.y.push_back(r_rel);
    sa.y.push_back(a_rel);
  }
  ctx.expect("gauss_identity", worst_gauss <= tol, "max relative " + fmt(worst_gauss));
  ctx.expect("green_identity", worst_green <= tol, "max relative " + fmt(worst_green));
  ctx.expect("adjointness", worst_adj <= tol, "max relative " + fmt(worst_adj));

  const SparseMatrix a = assemble_stiffness(0.0, spec, m, cfg.quad).matrix;
  write_coo(a, ctx.file("stiffness_coo.csv"));
  const Eigen::MatrixXd ad(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (ad + ad.transpose()), Eigen::EigenvaluesOnly);
  const double norm = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  const double sym = (ad - ad.transpose()).cwiseAbs().maxCoeff() / norm;
  const double lmin = es.eigenvalues().minCoeff() / norm;
  const double row = (ad * Eigen::VectorXd::Ones(ad.rows())).cwiseAbs().maxCoeff() / norm;
  CsvWriter s(ctx.file("structure.csv"));
  s.header({"quantity", "value", "limit", "pass"});
  s.field("symmetry").field(sym).field(stol).field(sym <= stol);
  s.end_row();
  s.field("lambda_min").field(lmin).field(-stol).field(lmin >= -stol);
  s.end_row();
  s.field("row_sum").field(row).field(stol).field(row <= stol);
  s.end_row();
  ctx.expect("stiffness_symmetric", sym <= stol, "relative asymmetry " + fmt(sym));
  ctx.expect("stiffness_psd", lmin >= -stol, "lambda_min / ||A|| = " + fmt(lmin));
  ctx.expect("stiffness_kills_constants", row <= stol, "||A 1|| / ||A|| = " + fmt(row));

  write_line_plot({"Calculus identity residuals", "field", "relative residual", false, true, {sg, sr, sa}},
                  ctx.file("residuals.svg"));
  ctx.result.summary["fields"] = fields;
  ctx.result.summary["max_gauss_relative"] = worst_gauss;
  ctx.result.summary["max_green_relative"] = worst_green;
  ctx.result.summary["max_adjoint_relative"] = worst_adj;
}

// ---------------------------------------------------------------------------

void audit_spaces(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Section e = cfg.experiment_section();
  e.only({"samples", "poincare_levels", "drift_limit", "degenerate_tolerance"});
  const int samples = e.integer_in("samples", 100, 10, 1000000);
  const int base = cfg.mesh.dim == 1 ? cfg.mesh.elements : cfg.mesh.nx;
  const std::vector<double> lv = e.numbers("poincare_levels", {double(base), double(2 * base)});
  if (lv.size() < 2) e.fail("poincare_levels", "need at least two levels");
  for (std::size_t i = 0; i < lv.size(); ++i)
    if (!(lv[i] >= 1.0 && lv[i] == std::floor(lv[i]))) e.fail("poincare_levels/" + std::to_string(i), "need a positive integer");
  const double drift_limit = e.number_in("drift_limit", 0.1, 0.0, 10.0, true);
  const double dtol = e.number_in("degenerate_tolerance", 1e-6, 0.0, 1.0, true);

  const Mesh m = cfg.build_mesh();
  const NormContext nc(cfg.spec, m, 0.0, cfg.quad);
  const std::vector<Field> fields = sample_fields(m, samples, cfg.seed, cfg.constraint);
  const EmbeddingAudit audit = audit_embeddings(fields, nc, cfg.constraint);
  write_embedding_csv(audit, ctx.file("embeddings.csv"));
  ctx.expect("upper_embedding_iii", audit.violations_iii == 0, std::to_string(audit.violations_iii) + " violations");
  ctx.expect("embedding_chain_finite",
             std::isfinite(audit.c_lo_var) && std::isfinite(audit.c_var_hi) && std::isfinite(audit.c_ii),
             "C lo/var " + fmt(audit.c_lo_var) + ", var/hi " + fmt(audit.c_var_hi) + ", (ii) " + fmt(audit.c_ii));

  KernelSpec flat = cfg.spec;
  flat.order = OrderField::constant(0.5 * (cfg.spec.order.beta_lo + cfg.spec.order.beta_hi));
  const NormContext fc(flat, m, 0.0, cfg.quad);
  const EmbeddingAudit deg = audit_embeddings(fields, fc, cfg.constraint);
  const double dev = std::max(std::abs(deg.c_lo_var - 1.0), std::abs(deg.c_var_hi - 1.0));
  ctx.expect("constant_order_chain_is_one", dev <= dtol, "max |C - 1| = " + fmt(dev));

  CsvWriter pw(ctx.file("poincare.csv"));
  pw.header({"constraint", "level", "nodes", "lambda_min", "drift"});
  for (Constraint kind : {Constraint::dirichlet, Constraint::neumann}) {
    std::vector<double> lam;
    for (double level : lv) {
      const int n = static_cast<int>(level);
      const Mesh ml = cfg.mesh.dim == 1 ? build_interval_mesh(cfg.mesh.a, cfg.mesh.b, n, cfg.spec.horizon, cfg.mesh.collar)
                                        : build_box_mesh(cfg.mesh.lx, cfg.mesh.ly, n, n, cfg.spec.horizon, cfg.mesh.collar);
      double l = 0.0;
      try {
        l = poincare_constant(kind, 0.0, cfg.spec, ml, cfg.quad).lambda_min;
      } catch (const std::runtime_error&) {
        l = 0.0;
      }
      const double drift = lam.empty() ? 0.0 : std::abs(l - lam.back()) / std::max(std::abs(l), 1e-300);
      lam.push_back(l);
      pw.field(to_string(kind)).field(n).field(ml.num_nodes()).field(l).field(drift);
      pw.end_row();
      ctx.expect("poincare_positive_" + to_string(kind) + "_" + std::to_string(n), l > 0.0, "lambda_min " + fmt(l));
      if (lam.size() > 1)
        ctx.expect("poincare_drift_" + to_string(kind) + "_" + std::to_string(n), drift < drift_limit,
                   "drift " + fmt(drift));
    }
  }

  Series lo{"lower/var", {}, {}, true}, hi{"var/upper", {}, {}, true};
  for (std::size_t i = 0; i < audit.rows.size(); ++i) {
    lo.x.push_back(i);
    hi.x.push_back(i);
    lo.y.push_back(audit.rows[i].ratio_lo_var);
    hi.y.push_back(audit.rows[i].ratio_var_hi);
  }
  write_line_plot({"Embedding norm ratios", "sample", "ratio", false, false, {lo, hi}}, ctx.file("embeddings.svg"));
  ctx.result.summary["c_lo_var"] = audit.c_lo_var;
  ctx.result.summary["c_var_hi"] = audit.c_var_hi;
  ctx.result.summary["c_ii"] = audit.c_ii;
  ctx.result.summary["violations_iii"] = audit.violations_iii;
}

// ---------------------------------------------------------------------------

double manufactured_error(const ExperimentConfig& cfg, int elements, int steps) {
  const Mesh m = build_interval_mesh(cfg.mesh.a, cfg.mesh.b, elements, cfg.spec.horizon, cfg.mesh.collar);
  StiffnessCache cache(cfg.spec, m, cfg.quad);
  const Field w = poincare_constant(cfg.constraint, cache.at(0.0), cache.mass(), m).eigenvector;
  const TimeGrid grid(cfg.grid.T, steps);
  std::vector<Field> exact;
  for (int k = 0; k < grid.count(); ++k) exact.push_back(std::exp(-grid.time(k)) * w);
  DiffusionOperator op(cache);
  const Source f = sampled_source(manufactured_rhs(exact, grid, op), grid);
  const Trajectory tr = solve_forward(exact[0], f, cfg.constraint, grid, cache, cfg.solver);
  double e2 = 0.0;
  for (int k = 0; k < grid.count(); ++k) {
    const Field d = tr.at(k) - exact[k];
    e2 += ((k == 0 || k == grid.steps) ? 0.5 : 1.0) * grid.dt() * d.dot(cache.mass() * d);
  }
  return std::sqrt(e2);
}

void solve(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Section e = cfg.experiment_section();
  e.only({"initial", "source", "source_amplitude", "convergence_levels", "convergence_ratio"});
  const std::string initial = e.text("initial", "bump", {"bump", "sample", "zero"});
  const std::string source = e.text("source", "zero", {"zero", "pulse"});
  const double amp = e.number("source_amplitude", 1.0);
  const int levels = e.integer_in("convergence_levels", 0, 0, 6);
  const double min_ratio = e.number_in("convergence_ratio", 1.5, 0.0, 100.0, true);
  if (levels == 1) e.fail("convergence_levels", "use 0 to skip or at least 2 levels");
  if (levels > 0 && cfg.mesh.dim != 1) e.fail("convergence_levels", "the convergence study runs on 1-D meshes");

  const Mesh m = cfg.build_mesh();
  StiffnessCache cache(cfg.spec, m, cfg.quad);
  Field u0 = Field::Zero(m.num_nodes());
  if (initial == "bump") u0 = project_constraint(interior_bump(m), cfg.constraint, m, cache.mass());
  if (initial == "sample") u0 = sample_fields(m, 1, cfg.seed, cfg.constraint)[0];
  Source f;
  if (source == "pulse") {
    const Field shape = interior_bump(m);
    f = [shape, amp](double t) -> Field { return amp * std::cos(3.0 * t) * shape; };
  }
  const Trajectory tr = solve_forward(u0, f, cfg.constraint, cfg.grid, cache, cfg.solver);
  write_trajectory_report(tr, cache, ctx.file("trajectory_report.csv"));
  write_trajectory_csv(tr, ctx.file("trajectory.csv"));
  write_trajectory_binary(tr, ctx.file("trajectory.bin"));

  const SparseMatrix& mass = cache.mass();
  const SparseMatrix& a = cache.at(0.0);
  double worst = 0.0, top = 0.0;
  bool monotone = true;
  Series l2{"L2 norm", {}, {}, false}, en{"energy", {}, {}, false};
  for (int k = 0; k < tr.grid.count(); ++k) {
    const Field& u = tr.at(k);
    const double n = mnorm(mass, u);
    top = std::max(top, n);
    const double v = cfg.constraint == Constraint::dirichlet ? std::sqrt(constraint_value(u, cfg.constraint, m))
                                                             : std::abs(Field::Ones(m.num_nodes()).dot(mass * u));
    worst = std::max(worst, v);
    if (k > 0 && n > mnorm(mass, tr.at(k - 1)) * (1.0 + 1e-12)) monotone = false;
    l2.x.push_back(tr.grid.time(k));
    l2.y.push_back(n);
    en.x.push_back(tr.grid.time(k));
    en.y.push_back(0.5 * u.dot(a * u));
  }
  ctx.expect("constraint_preserved", worst <= 1e-8 * std::max(top, 1e-300) || top == 0.0,
             "max violation " + fmt(worst));
  if (!f && cfg.solver.scheme == Scheme::implicit_euler)
    ctx.expect("l2_monotone_decay", monotone, monotone ? "nonincreasing at every step" : "L2 norm increased");

  const RegularityReport r = regularity_monitor(tr, f, cache);
  CsvWriter rw(ctx.file("regularity.csv"));
  rw.header({"quantity", "value"});
  for (const auto& [name, value] :
       std::vector<std::pair<const char*, double>>{{"sup_norm", r.sup_norm}, {"dt_norm", r.dt_norm},
                                                   {"strong_norm", r.strong_norm}, {"lhs", r.lhs},
                                                   {"source_norm", r.source_norm}, {"initial_norm", r.initial_norm},
                                                   {"rhs", r.rhs}, {"ratio", r.ratio}}) {
    rw.field(name).field(value);
    rw.end_row();
  }
  ctx.expect("regularity_consistent", std::isfinite(r.ratio) && !r.inconsistent, "ratio " + fmt(r.ratio));
  write_line_plot({"Norm history", "t", "norm", false, true, {l2, en}}, ctx.file("norms.svg"));
  ctx.result.summary["final_l2"] = mnorm(mass, tr.final());
  ctx.result.summary["regularity_ratio"] = r.ratio;

  if (levels >= 2) {
    CsvWriter cw(ctx.file("convergence.csv"));
    cw.header({"level", "elements", "steps", "error", "ratio"});
    Series es{"L2(Q) error", {}, {}, false};
    double prev = 0.0;
    bool ok = true;
    std::string detail;
    for (int level = 0; level < levels; ++level) {
      const int elements = cfg.mesh.elements << level;
      const int steps = cfg.grid.steps << level;
      const double err = manufactured_error(cfg, elements, steps);
      const double ratio = level == 0 ? 0.0 : prev / err;
      if (level > 0 && !(ratio >= min_ratio)) ok = false;
      detail += (detail.empty() ? "" : ", ") + fmt(err);
      cw.field(level).field(elements).field(steps).field(err).field(ratio);
      cw.end_row();
      es.x.push_back((cfg.mesh.b - cfg.mesh.a) / elements);
      es.y.push_back(err);
      prev = err;
    }
    ctx.expect("manufactured_convergence", ok, "errors " + detail);
    write_line_plot({"Manufactured solution error", "h", "L2(Q) error", true, true, {es}}, ctx.file("convergence.svg"));
  }
}

// ---------------------------------------------------------------------------

void carleman_certify(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  require_constraint(ctx, Constraint::dirichlet, "carleman-certify");
  const Section e = cfg.experiment_section();
  e.only({"members", "lambdas", "ss", "stability_limit", "min_s_points", "scale_factor", "scale_tolerance"});
  CertifyOptions opts;
  const int members = e.integer_in("members", 10, 1, 100000);
  opts.lambdas = e.numbers("lambdas", opts.lambdas);
  opts.ss = e.numbers("ss", opts.ss);
  for (const char* key : {"lambdas", "ss"}) {
    const auto& v = std::string(key) == "lambdas" ? opts.lambdas : opts.ss;
    if (v.empty()) e.fail(key, "must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0)) e.fail(std::string(key) + "/" + std::to_string(i), "must be positive");
      if (i > 0 && !(v[i] > v[i - 1])) e.fail(std::string(key) + "/" + std::to_string(i), "must increase");
    }
  }
  opts.stability_limit = e.number_in("stability_limit", opts.stability_limit, 1.0, 1e12);
  opts.min_s_points = e.integer_in("min_s_points", opts.min_s_points, 1, static_cast<int>(opts.ss.size()));
  const double factor = e.number("scale_factor", 3.7);
  if (factor == 0.0) e.fail("scale_factor", "must be nonzero");
  const double stol = e.number_in("scale_tolerance", 1e-10, 0.0, 1.0, true);

  const Mesh m = cfg.build_mesh();
  StiffnessCache cache(cfg.spec, m, cfg.quad);
  std::vector<CarlemanProfile> suite;
  std::vector<Trajectory> trajs;
  for (const Field& u0 : sample_fields(m, members, cfg.seed, Constraint::dirichlet)) {
    trajs.push_back(solve_forward(u0, {}, Constraint::dirichlet, cfg.grid, cache, cfg.solver));
    suite.push_back(carleman_profile(trajs.back(), {}, CarlemanVariant::forward, cache));
  }
  const Certificate cert = certify(suite, opts);
  write_certificate_csv(cert, opts, ctx.file("certificate.csv"));
  {
    std::ofstream out(ctx.file("certificate_summary.txt"), std::ios::binary);
    out << certificate_summary(cert, opts);
  }
  ctx.expect("certified", cert.certified, cert.message);

  bool nonneg = true;
  for (const CertificateRow& r : cert.rows) {
    const CarlemanReport& t = r.report;
    for (double v : {t.lhs_dt, t.lhs_diff, t.lhs_l2, t.lhs_semi, t.rhs_source, t.rhs_interaction, t.rhs_boundary})
      if (!(v >= 0.0)) nonneg = false;
  }
  ctx.expect("terms_nonnegative", nonneg, nonneg ? "all terms >= 0" : "negative term found");

  if (cert.certified) {
    const std::size_t half = opts.ss.size() / 2;
    double spread = 0.0;
    for (std::size_t l = static_cast<std::size_t>(cert.lambda0); l < opts.lambdas.size(); ++l) {
      double lo = INFINITY, hi = 0.0;
      for (std::size_t s = half; s < opts.ss.size(); ++s) {
        lo = std::min(lo, cert.c_grid[l][s]);
        hi = std::max(hi, cert.c_grid[l][s]);
      }
      spread = std::max(spread, lo > 0.0 ? hi / lo : INFINITY);
    }
    ctx.expect("top_half_stability", spread <= opts.stability_limit, "max spread " + fmt(spread));
    ctx.result.summary["top_half_spread"] = spread;
  }

  Trajectory scaled = trajs.front();
  for (Field& u : scaled.snapshots) u *= factor;
  const CarlemanProfile sp = carleman_profile(scaled, {}, CarlemanVariant::forward, cache);
  double worst = 0.0;
  for (std::size_t l = 0; l < opts.lambdas.size(); ++l)
    for (double s : opts.ss) {
      const CarlemanWeight w(opts.lambdas[l], s, 1);
      const double k = cert.k.empty() ? 0.0 : cert.k[l];
      const double r1 = carleman_terms(suite.front(), w).ratio(k);
      const double r2 = carleman_terms(sp, w).ratio(k);
      if (r1 > 0.0 && std::isfinite(r1)) worst = std::max(worst, std::abs(r2 - r1) / r1);
    }
  ctx.expect("ratio_scale_invariant", worst <= stol, "max relative change " + fmt(worst));

  Heatmap hm;
  hm.title = "Certified C(lambda, s)";
  hm.xlabel = "s";
  hm.ylabel = "lambda";
  for (double s : opts.ss) hm.x_ticks.push_back(fmt(s));
  for (double l : opts.lambdas) hm.y_ticks.push_back(fmt(l));
  hm.values = cert.c_grid;
  write_heatmap(hm, ctx.file("certificate_heatmap.svg"));
  ctx.result.summary["certified"] = cert.certified;
  ctx.result.summary["constant"] = cert.constant;
  if (cert.certified) {
    ctx.result.summary["lambda0"] = opts.lambdas[cert.lambda0];
    ctx.result.summary["s0"] = opts.ss[cert.s0];
  }
}

// ---------------------------------------------------------------------------

void backward(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  require_constraint(ctx, Constraint::dirichlet, "backward");
  const Section e = cfg.experiment_section();
  e.only({"target_time", "regularizations", "noise", "max_iterations", "family_modes", "family_time", "family_steps",
          "family_target", "theta_tolerance"});
  const double T = cfg.grid.T;
  const double t0 = e.number_in("target_time", 0.5 * T, 0.0, T, false, true);
  const int k0 = static_cast<int>(std::lround(t0 / cfg.grid.dt()));
  if (std::abs(k0 * cfg.grid.dt() - t0) > 1e-9 * T) e.fail("target_time", "must be a grid time");
  const std::vector<double> rhos = e.numbers("regularizations", {1e-2, 1e-4, 1e-6});
  if (rhos.empty()) e.fail("regularizations", "must not be empty");
  for (std::size_t i = 0; i < rhos.size(); ++i)
    if (!(rhos[i] > 0.0)) e.fail("regularizations/" + std::to_string(i), "must be positive");
  const double noise = e.number_in("noise", 0.0, 0.0, 10.0);
  BackwardOptions bo;
  bo.scheme = cfg.solver.scheme;
  bo.cg_tol = cfg.solver.cg_tol;
  bo.max_iterations = e.integer_in("max_iterations", bo.max_iterations, 1, 1000000);
  const int modes = e.integer_in("family_modes", 8, 2, 10000);
  const double ft = e.number_in("family_time", 2.0, 0.0, 1e6, true);
  const int fsteps = e.integer_in("family_steps", 800, 2, 1 << 20);
  const double ftarget = e.number_in("family_target", 0.5 * ft, 0.0, ft, false, true);
  const TimeGrid fgrid(ft, fsteps);
  if (std::abs(std::lround(ftarget / fgrid.dt()) * fgrid.dt() - ftarget) > 1e-9 * ft)
    e.fail("family_target", "must be a grid time of the family grid");
  const double theta_tol = e.number_in("theta_tolerance", 0.05, 0.0, 1.0, true);

  const Mesh m = cfg.build_mesh();
  StiffnessCache cache(cfg.spec, m, cfg.quad);
  const Field u0 = project_constraint(interior_bump(m), Constraint::dirichlet, m, cache.mass());
  SolverOptions so = cfg.solver;
  const Trajectory truth = solve_forward(u0, {}, Constraint::dirichlet, cfg.grid, cache, so);
  const Field target = truth.at(k0);
  const Field data = noise > 0.0 ? add_noise(truth.final(), noise, cfg.seed) : truth.final();

  CsvWriter w(ctx.file("backward.csv"));
  w.header({"regularization", "error", "iterations", "misfit", "penalty"});
  std::vector<double> errs;
  Series es{"relative error at t0", {}, {}, false};
  Field best;
  for (double rho : rhos) {
    const BackwardResult r = backward_reconstruct({data, t0, rho, noise}, cache, cfg.grid, bo);
    const double err = mnorm(cache.mass(), r.at_target - target) / std::max(mnorm(cache.mass(), target), 1e-300);
    errs.push_back(err);
    w.field(rho).field(err).field(r.iterations).field(r.misfit).field(r.penalty);
    w.end_row();
    es.x.push_back(rho);
    es.y.push_back(err);
    best = r.at_target;
  }
  {
    CsvWriter rw(ctx.file("reconstruction.csv"));
    rw.header({"node", "x", "y", "truth", "reconstruction"});
    for (int i = 0; i < m.num_nodes(); ++i) {
      rw.field(i).field(m.nodes[i][0]).field(m.nodes[i][1]).field(target[i]).field(best[i]);
      rw.end_row();
    }
  }
  if (noise == 0.0) {
    bool dec = true;
    std::string detail;
    for (std::size_t i = 0; i < errs.size(); ++i) {
      if (i > 0 && !(errs[i] < errs[i - 1])) dec = false;
      detail += (detail.empty() ? "" : ", ") + fmt(errs[i]);
    }
    ctx.expect("tikhonov_error_decreasing", dec, "errors " + detail);
  }
  write_line_plot({"Backward reconstruction error", "regularization", "relative error", true, true, {es}},
                  ctx.file("backward_error.svg"));

  const std::vector<Trajectory> family = eigenmode_family(cache, fgrid, modes, 5.0);
  const StabilityAudit audit = stability_audit(family, ftarget, cache);
  write_stability_csv(audit, ctx.file("stability.csv"));
  const double expect_theta = ftarget / ft;
  ctx.expect("theta_matches_ratio", std::abs(audit.theta - expect_theta) <= theta_tol,
             "theta " + fmt(audit.theta) + " vs " + fmt(expect_theta));
  ctx.expect("stability_slack_nonnegative", audit.violations == 0, std::to_string(audit.violations) + " violations");
  ctx.expect("log_rate_bounded", std::isfinite(audit.max_log_rate), "max " + fmt(audit.max_log_rate));

  Series pts{"members", {}, {}, true}, fit{"fit", {}, {}, false};
  double xmin = INFINITY, xmax = -INFINITY;
  for (const StabilityRow& r : audit.rows) {
    const double x = std::log(r.z / r.y);
    pts.x.push_back(x);
    pts.y.push_back(std::log(r.x / r.y));
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  for (double x : {xmin, xmax}) {
    fit.x.push_back(x);
    fit.y.push_back(std::log(audit.fit_constant) + audit.theta * x);
  }
  write_line_plot({"Stability fit", "log(Z/Y)", "log(X/Y)", false, false, {pts, fit}}, ctx.file("stability_fit.svg"));
  ctx.result.summary["theta"] = audit.theta;
  ctx.result.summary["constant"] = audit.constant;
  ctx.result.summary["errors"] = errs;
}

// ---------------------------------------------------------------------------

void inverse_source(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  require_constraint(ctx, Constraint::neumann, "inverse-source");
  if (cfg.mesh.dim != 2) ctx.section("mesh").fail("dim", "inverse-source runs on 2-D meshes");
  const Section e = cfg.experiment_section();
  e.only({"space_modes", "time_modes", "noise", "tolerance"});
  const int sm = e.integer_in("space_modes", 8, 1, 1000);
  const int tm = e.integer_in("time_modes", 4, 1, 1000);
  const double noise = e.number_in("noise", 0.01, 0.0, 10.0);
  const double tol = e.number_in("tolerance", 1e-6, 0.0, 1.0, true);
  if (!cfg.spec.order.is_constant) ctx.section("kernel").fail("order", "inverse-source needs a constant order");
  if (cfg.spec.tensor.name != "identity") ctx.section("kernel").fail("tensor", "inverse-source needs the identity tensor");

  const Mesh m = cfg.build_mesh();
  Point lo = m.nodes.front(), hi = m.nodes.front();
  for (const Point& x : m.nodes)
    for (int d = 0; d < 2; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  const double diam = std::hypot(hi[0] - lo[0], hi[1] - lo[1]);
  if (cfg.spec.horizon < diam)
    ctx.section("kernel").fail("horizon", "must be at least the mesh diameter " + fmt(diam) +
                                               " to stand in for an infinite horizon");

  StiffnessCache cache(cfg.spec, m, cfg.quad);
  const SourceProblem p = separable_source_basis(cfg.mesh.lx, cfg.mesh.ly, cfg.grid.T, sm, tm);
  const SourceMap map = source_forward_map(p, cfg.grid, cache, cfg.solver.scheme);
  write_source_map_csv(map, ctx.file("singular_values.csv"));
  ctx.expect("sigma_min_positive", map.sigma_min > 0.0 && map.rank == map.g.cols(),
             "sigma_min " + fmt(map.sigma_min) + ", rank " + std::to_string(map.rank) + " of " +
                 std::to_string(map.g.cols()));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd c(map.g.cols());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = gauss(rng);
  const Eigen::VectorXd data = map.g * c;
  double err = INFINITY;
  if (map.rank > 0) err = (source_reconstruct(data, map, map.rank).coefficients - c).norm() / c.norm();
  ctx.expect("noiseless_reconstruction", err < tol, "relative error " + fmt(err));

  CsvWriter lw(ctx.file("lcurve.csv"));
  lw.header({"truncation", "coefficient_error", "residual"});
  Series ls{"coefficient error", {}, {}, false};
  if (map.rank > 0) {
    Field noisy = add_noise(data, noise, cfg.seed + 1);
    for (int t = map.rank; t >= 1; --t) {
      const SourceFit fit = source_reconstruct(noisy, map, t);
      const double e2 = (fit.coefficients - c).norm() / c.norm();
      lw.field(t).field(e2).field(fit.residual);
      lw.end_row();
      ls.x.push_back(t);
      ls.y.push_back(e2);
    }
  }
  Series sv{"singular values", {}, {}, false};
  for (Eigen::Index i = 0; i < map.singular_values.size(); ++i) {
    sv.x.push_back(static_cast<double>(i + 1));
    sv.y.push_back(map.singular_values[i]);
  }
  write_line_plot({"Singular values of the source map", "index", "sigma", false, true, {sv}},
                  ctx.file("singular_values.svg"));
  write_line_plot({"Truncated SVD with noise", "truncation", "relative coefficient error", false, true, {ls}},
                  ctx.file("lcurve.svg"));
  ctx.result.summary["sigma_min"] = map.sigma_min;
  ctx.result.summary["sigma_max"] = map.sigma_max;
  ctx.result.summary["condition"] = map.condition;
  ctx.result.summary["rank"] = map.rank;
  ctx.result.summary["noiseless_error"] = err;
  ctx.result.summary["horizon_note"] = "horizon " + fmt(map.horizon) + " >= mesh diameter " + fmt(diam) +
                                       " replaces the infinite horizon";
}

}  // namespace

RunResult run_config(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  Context ctx(cfg, out);
  try {
    if (cfg.command == "verify-calculus") verify_calculus(ctx);
    else if (cfg.command == "audit-spaces") audit_spaces(ctx);
    else if (cfg.command == "solve") solve(ctx);
    else if (cfg.command == "carleman-certify") carleman_certify(ctx);
    else if (cfg.command == "backward") backward(ctx);
    else if (cfg.command == "inverse-source") inverse_source(ctx);
    else throw std::invalid_argument("unknown command " + cfg.command);
  } catch (const ConfigError& e) {
    ctx.result.status = 2;
    ctx.result.message = e.what();
    return ctx.result;
  } catch (const std::invalid_argument& e) {
    ctx.result.status = 2;
    ctx.result.message = cfg.doc->name + ": " + e.what();
    return ctx.result;
  }
  ctx.result.status = ctx.result.failed.empty() ? 0 : 1;
  if (!ctx.result.failed.empty()) {
    std::string list;
    for (const auto& f : ctx.result.failed) list += (list.empty() ? "" : ", ") + f;
    ctx.result.message = "failed invariants: " + list;
  }
  return ctx.result;
}

RunResult run(const RunArgs& args) {
  RunResult bad;
  bad.status = 2;
  std::ifstream in(args.config, std::ios::binary);
  if (!in) {
    bad.message = "cannot read config " + args.config.string();
    return bad;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  try {
    cfg = load_config(ss.str(), args.config.string(), args.command);
  } catch (const ConfigError& e) {
    bad.message = e.what();
    return bad;
  } catch (const std::invalid_argument& e) {
    bad.message = e.what();
    return bad;
  }
  if (args.seed) cfg.seed = *args.seed;
  set_deterministic(!args.fast);

  const auto start = std::chrono::steady_clock::now();
  RunResult res = run_config(cfg, args.out);
  if (res.status == 2) return res;
  Manifest man;
  man.command = cfg.command;
  man.config = cfg.raw;
  man.seed = cfg.seed;
  man.deterministic = deterministic();
  man.threads = thread_count();
  man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  man.status = res.status;
  man.failed = res.failed;
  man.summary = res.summary;
  write_manifest(man, args.out, res.files);
  res.files.push_back("manifest.json");
  return res;
}

}  // namespace nlv::cli

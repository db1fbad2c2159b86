#include "nlv/cli/config.hpp"

#include <cmath>
#include <regex>
#include <sstream>

#include "nlv/io.hpp"

namespace nlv::cli {

const std::vector<std::string> kCommands = {"verify-calculus", "audit-spaces", "solve",
                                            "carleman-certify", "backward", "inverse-source"};

namespace {

struct Scanner {
  const std::string& s;
  std::size_t i = 0;
  int line = 1, col = 1;
  std::map<std::string, std::pair<int, int>>& out;

  char peek() const { return i < s.size() ? s[i] : '\0'; }
  void advance() {
    if (s[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  }
  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) advance();
  }
  std::string string() {
    std::string v;
    advance();  // opening quote
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\') {
        advance();
        if (i >= s.size()) break;
      }
      v += s[i];
      advance();
    }
    if (i < s.size()) advance();
    return v;
  }
  void value(const std::string& ptr) {
    skip_ws();
    const char c = peek();
    if (c == '{') {
      advance();
      skip_ws();
      while (peek() != '}' && i < s.size()) {
        skip_ws();
        const std::pair<int, int> at{line, col};
        const std::string key = string();
        out.emplace(ptr + "/" + key, at);
        skip_ws();
        if (peek() == ':') advance();
        value(ptr + "/" + key);
        skip_ws();
        if (peek() == ',') advance();
        skip_ws();
      }
      if (i < s.size()) advance();
    } else if (c == '[') {
      advance();
      skip_ws();
      int k = 0;
      while (peek() != ']' && i < s.size()) {
        skip_ws();
        const std::string p = ptr + "/" + std::to_string(k++);
        out.emplace(p, std::pair<int, int>{line, col});
        value(p);
        skip_ws();
        if (peek() == ',') advance();
        skip_ws();
      }
      if (i < s.size()) advance();
    } else if (c == '"') {
      string();
    } else {
      while (i < s.size() && s[i] != ',' && s[i] != '}' && s[i] != ']' && s[i] != ' ' && s[i] != '\n' &&
             s[i] != '\r' && s[i] != '\t')
        advance();
    }
  }
};

std::string type_name(const nlohmann::json& j) {
  return j.is_number() ? "number" : j.is_string() ? "string" : j.is_boolean() ? "boolean"
       : j.is_array() ? "array" : j.is_object() ? "object" : "null";
}

}  // namespace

std::map<std::string, std::pair<int, int>> index_positions(const std::string& text) {
  std::map<std::string, std::pair<int, int>> out;
  Scanner sc{text, 0, 1, 1, out};
  sc.skip_ws();
  out.emplace("", std::pair<int, int>{sc.line, sc.col});
  sc.value("");
  return out;
}

std::pair<int, int> Document::locate(std::string pointer) const {
  while (true) {
    const auto it = positions.find(pointer);
    if (it != positions.end()) return it->second;
    if (pointer.empty()) return {1, 1};
    pointer = pointer.substr(0, pointer.rfind('/'));
  }
}

std::string Document::dotted(const std::string& pointer) const {
  std::string d = pointer;
  if (!d.empty() && d[0] == '/') d.erase(0, 1);
  for (char& c : d)
    if (c == '/') c = '.';
  return d.empty() ? "(root)" : d;
}

std::shared_ptr<Document> parse_document(const std::string& text, const std::string& name) {
  auto doc = std::make_shared<Document>();
  doc->name = name;
  doc->text = text;
  try {
    doc->root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    int line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < byte; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    if (pos != std::string::npos) what = what.substr(pos);
    throw ConfigError(name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what, line, col);
  }
  if (!doc->root.is_object()) throw ConfigError(name + ":1:1: the config must be a JSON object", 1, 1);
  doc->positions = index_positions(text);
  return doc;
}

Section::Section(const nlohmann::json* node, std::string pointer, std::shared_ptr<const Document> doc)
    : node_(node), pointer_(std::move(pointer)), doc_(std::move(doc)) {}

const nlohmann::json* Section::member(const std::string& key) const {
  if (!node_) return nullptr;
  const auto it = node_->find(key);
  return it == node_->end() ? nullptr : &*it;
}

bool Section::has(const std::string& key) const { return member(key) != nullptr; }

void Section::fail(const std::string& key, const std::string& message) const {
  const std::string ptr = key.empty() ? pointer_ : pointer(key);
  const auto [line, col] = doc_->locate(ptr);
  throw ConfigError(doc_->name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                        doc_->dotted(ptr) + ": " + message,
                    line, col);
}

Section Section::section(const std::string& key) const {
  const nlohmann::json* m = member(key);
  if (m && !m->is_object()) fail(key, "expected an object, got " + type_name(*m));
  return Section(m, pointer(key), doc_);
}

double Section::number(const std::string& key, double def) const {
  const nlohmann::json* m = member(key);
  if (!m) return def;
  if (!m->is_number()) fail(key, "expected a number, got " + type_name(*m));
  const double v = m->get<double>();
  if (!std::isfinite(v)) fail(key, "must be finite");
  return v;
}

std::optional<double> Section::optional_number(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return number(key, 0.0);
}

double Section::number_in(const std::string& key, double def, double lo, double hi, bool open_lo,
                          bool open_hi) const {
  const double v = number(key, def);
  const bool below = open_lo ? !(v > lo) : !(v >= lo);
  const bool above = open_hi ? !(v < hi) : !(v <= hi);
  if (below || above) {
    std::ostringstream m;
    m << "value " << format_double(v) << " outside " << (open_lo ? "(" : "[") << format_double(lo) << ", "
      << format_double(hi) << (open_hi ? ")" : "]");
    fail(key, m.str());
  }
  return v;
}

int Section::integer_in(const std::string& key, int def, int lo, int hi) const {
  const nlohmann::json* m = member(key);
  if (!m) return def;
  if (!m->is_number_integer()) fail(key, "expected an integer, got " + type_name(*m));
  const long long v = m->get<long long>();
  if (v < lo || v > hi)
    fail(key, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

bool Section::boolean(const std::string& key, bool def) const {
  const nlohmann::json* m = member(key);
  if (!m) return def;
  if (!m->is_boolean()) fail(key, "expected a boolean, got " + type_name(*m));
  return m->get<bool>();
}

std::string Section::text(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) const {
  const nlohmann::json* m = member(key);
  if (!m) return def;
  if (!m->is_string()) fail(key, "expected a string, got " + type_name(*m));
  const std::string v = m->get<std::string>();
  if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(key, "unknown value \"" + v + "\" (expected one of " + list + ")");
  }
  return v;
}

std::vector<double> Section::numbers(const std::string& key, const std::vector<double>& def) const {
  const nlohmann::json* m = member(key);
  if (!m) return def;
  if (!m->is_array()) fail(key, "expected an array of numbers, got " + type_name(*m));
  std::vector<double> v;
  for (std::size_t i = 0; i < m->size(); ++i) {
    if (!(*m)[i].is_number()) fail(key + "/" + std::to_string(i), "expected a number");
    v.push_back((*m)[i].get<double>());
  }
  return v;
}

void Section::only(const std::vector<std::string>& keys) const {
  if (!node_) return;
  for (auto it = node_->begin(); it != node_->end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) fail(it.key(), "unknown key");
}

namespace {

struct Defaults {
  MeshConfig mesh;
  std::string order = "sine";
  double beta = 0.5, amplitude = 0.3;
  double horizon = 0.3;
  double T = 1.0;
  int steps = 20;
  Constraint constraint = Constraint::dirichlet;
};

Defaults defaults_for(const std::string& command) {
  Defaults d;
  if (command == "verify-calculus") return d;
  if (command == "audit-spaces") {
    d.mesh.elements = 16;
    d.horizon = 0.25;
  } else if (command == "solve") {
    d.mesh.elements = 16;
    d.amplitude = 0.2;
    d.horizon = 0.25;
    d.T = 0.5;
  } else if (command == "carleman-certify") {
    d.mesh.elements = 16;
    d.amplitude = 0.2;
    d.horizon = 0.25;
    d.steps = 40;
  } else if (command == "backward") {
    d.mesh.elements = 32;
    d.order = "constant";
    d.horizon = 0.25;
    d.T = 0.1;
  } else if (command == "inverse-source") {
    d.mesh.dim = 2;
    d.mesh.collar = 0.25;
    d.order = "constant";
    d.beta = 0.4;
    d.horizon = 2.2;
    d.T = 0.5;
    d.steps = 8;
    d.constraint = Constraint::neumann;
  }
  return d;
}

OrderField parse_order(const Section& s, const Defaults& d, int dim) {
  s.only({"preset", "beta", "mean", "amplitude", "base", "height", "center", "width", "nodes", "values",
          "beta_lo", "beta_hi", "lipschitz"});
  const std::string preset = s.text("preset", d.order, {"constant", "sine", "bump", "piecewise_linear"});
  OrderField f;
  if (preset == "constant") {
    f = OrderField::constant(s.number("beta", d.beta));
  } else if (preset == "sine") {
    f = OrderField::sine(s.number("mean", d.beta), s.number("amplitude", d.amplitude));
  } else if (preset == "bump") {
    const std::vector<double> c = s.numbers("center", {0.5, 0.5});
    if (c.size() != 2 && !(dim == 1 && c.size() == 1)) s.fail("center", "expected one coordinate per dimension");
    const double width = s.number("width", 0.2);
    if (!(width > 0.0)) s.fail("width", "must be positive");
    f = OrderField::bump(s.number("base", 0.4), s.number("height", 0.2), {c[0], c.size() > 1 ? c[1] : 0.0}, width);
  } else {
    const std::vector<double> xs = s.numbers("nodes", {});
    const std::vector<double> vs = s.numbers("values", {});
    if (xs.size() < 2) s.fail("nodes", "need at least two nodes");
    if (xs.size() != vs.size()) s.fail("values", "need one value per node");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) s.fail("nodes/" + std::to_string(i), "nodes must increase");
    f = OrderField::piecewise_linear(xs, vs);
  }
  if (s.has("beta_lo")) f.beta_lo = s.number("beta_lo", f.beta_lo);
  if (s.has("beta_hi")) f.beta_hi = s.number("beta_hi", f.beta_hi);
  if (s.has("lipschitz")) {
    const double l = s.number("lipschitz", 0.0);
    if (l < 0.0) s.fail("lipschitz", "must be nonnegative");
    f.lipschitz_bound = l;
  }
  auto bound_key = [&](const char* k, std::initializer_list<const char*> fallbacks) -> std::string {
    if (s.has(k)) return k;
    for (const char* fb : fallbacks)
      if (s.has(fb)) return fb;
    return "";
  };
  if (!(f.beta_hi < 1.0))
    s.fail(bound_key("beta_hi", {"beta", "mean", "amplitude", "base", "height", "values"}),
           "beta^* = " + format_double(f.beta_hi) + " violates the bound beta^* < 1");
  if (!(f.beta_lo > 0.0))
    s.fail(bound_key("beta_lo", {"beta", "mean", "amplitude", "base", "values"}),
           "beta_* = " + format_double(f.beta_lo) + " violates the bound beta_* > 0");
  if (!(f.beta_lo <= f.beta_hi))
    s.fail(bound_key("beta_lo", {}), "beta_* = " + format_double(f.beta_lo) + " exceeds beta^* = " +
                                         format_double(f.beta_hi));
  return f;
}

DiffusionTensor parse_tensor(const Section& s) {
  const std::string t = s.text("tensor", "identity");
  static const std::regex scaled(R"(^\s*scaled_identity\s*\(\s*([-+0-9.eE]+)\s*\)\s*$)");
  static const std::regex periodic(R"(^\s*time_periodic\s*\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)\s*$)");
  std::smatch m;
  auto value = [&](const std::string& x) {
    try {
      std::size_t used = 0;
      const double v = std::stod(x, &used);
      if (used != x.size() || !std::isfinite(v)) throw std::invalid_argument(x);
      return v;
    } catch (const std::exception&) {
      s.fail("tensor", "bad number \"" + x + "\"");
    }
  };
  if (t == "identity") return DiffusionTensor::identity();
  if (std::regex_match(t, m, scaled)) {
    const double c = value(m[1]);
    if (!(c > 0.0)) s.fail("tensor", "scaled_identity needs c > 0");
    return DiffusionTensor::scaled_identity(c);
  }
  if (std::regex_match(t, m, periodic)) {
    const double c = value(m[1]);
    const double w = value(m[2]);
    if (!(std::abs(c) < 1.0)) s.fail("tensor", "time_periodic needs |c| < 1 so that 1 + c sin(omega t) > 0");
    return DiffusionTensor::time_periodic(c, w);
  }
  s.fail("tensor", "unknown tensor \"" + t + "\" (expected identity, scaled_identity(c) or time_periodic(c, omega))");
}

}  // namespace

Mesh ExperimentConfig::build_mesh() const {
  if (mesh.dim == 1) return build_interval_mesh(mesh.a, mesh.b, mesh.elements, spec.horizon, mesh.collar);
  return build_box_mesh(mesh.lx, mesh.ly, mesh.nx, mesh.ny, spec.horizon, mesh.collar);
}

Section ExperimentConfig::experiment_section() const {
  const auto it = doc->root.find("experiment");
  return Section(it == doc->root.end() ? nullptr : &*it, "/experiment", doc);
}

ExperimentConfig load_config(const std::string& text, const std::string& name, const std::string& command) {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw std::invalid_argument("unknown command " + command);
  ExperimentConfig cfg;
  cfg.command = command;
  cfg.doc = parse_document(text, name);
  cfg.raw = cfg.doc->root;
  const Section root(&cfg.doc->root, "", cfg.doc);
  root.only({"seed", "mesh", "kernel", "quadrature", "grid", "solver", "experiment", "description"});
  const Defaults d = defaults_for(command);

  if (root.has("seed")) {
    const nlohmann::json& s = cfg.doc->root["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      root.fail("seed", "expected a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }

  const Section mesh = root.section("mesh");
  mesh.only({"dim", "a", "b", "elements", "lx", "ly", "nx", "ny", "collar"});
  cfg.mesh = d.mesh;
  cfg.mesh.dim = mesh.integer_in("dim", d.mesh.dim, 1, 2);
  if (cfg.mesh.dim == 1) {
    cfg.mesh.a = mesh.number("a", d.mesh.a);
    cfg.mesh.b = mesh.number("b", d.mesh.b);
    if (!(cfg.mesh.b > cfg.mesh.a)) mesh.fail("b", "need b > a");
    cfg.mesh.elements = mesh.integer_in("elements", d.mesh.elements, 1, 1 << 16);
  } else {
    cfg.mesh.lx = mesh.number_in("lx", d.mesh.lx, 0.0, 1e6, true);
    cfg.mesh.ly = mesh.number_in("ly", d.mesh.ly, 0.0, 1e6, true);
    cfg.mesh.nx = mesh.integer_in("nx", d.mesh.nx, 1, 1024);
    cfg.mesh.ny = mesh.integer_in("ny", d.mesh.ny, 1, 1024);
  }
  if (mesh.has("collar")) cfg.mesh.collar = mesh.number_in("collar", 0.0, 0.0, 1e6, true);

  const Section kernel = root.section("kernel");
  kernel.only({"order", "tensor", "horizon", "symmetrize"});
  cfg.spec.dim = cfg.mesh.dim;
  cfg.spec.order = parse_order(kernel.section("order"), d, cfg.mesh.dim);
  cfg.spec.tensor = parse_tensor(kernel);
  cfg.spec.horizon = kernel.number_in("horizon", d.horizon, 0.0, 1e6, true);
  cfg.spec.symmetrize = kernel.boolean("symmetrize", true);

  const Section quad = root.section("quadrature");
  quad.only({"order", "levels", "grading", "order_2d", "levels_2d"});
  cfg.quad.order = quad.integer_in("order", cfg.quad.order, 1, 20);
  cfg.quad.levels = quad.integer_in("levels", cfg.quad.levels, 0, 30);
  cfg.quad.grading = quad.number_in("grading", cfg.quad.grading, 0.0, 1.0, true, true);
  cfg.quad.order_2d = quad.integer_in("order_2d", cfg.quad.order_2d, 1, 20);
  cfg.quad.levels_2d = quad.integer_in("levels_2d", cfg.quad.levels_2d, 0, 20);

  const Section grid = root.section("grid");
  grid.only({"T", "steps"});
  cfg.grid = TimeGrid(grid.number_in("T", d.T, 0.0, 1e6, true), grid.integer_in("steps", d.steps, 1, 1 << 20));

  const Section solver = root.section("solver");
  solver.only({"scheme", "constraint", "freeze_operator", "cg_tol"});
  cfg.solver.scheme = scheme_from_string(solver.text("scheme", "implicit_euler", {"implicit_euler", "crank_nicolson"}));
  cfg.constraint = constraint_from_string(solver.text("constraint", to_string(d.constraint), {"dirichlet", "neumann"}));
  cfg.solver.freeze_operator = solver.boolean("freeze_operator", false);
  cfg.solver.cg_tol = solver.number_in("cg_tol", cfg.solver.cg_tol, 0.0, 1.0, true, true);

  if (root.has("experiment")) (void)root.section("experiment");
  return cfg;
}

}  // namespace nlv::cli

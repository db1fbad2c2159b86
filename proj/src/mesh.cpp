#include "nlv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nlv/io.hpp"

namespace nlv {

namespace {

double cross2(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double ux = b[0] - a[0];
  const double uy = b[1] - a[1];
  const double len2 = ux * ux + uy * uy;
  double s = len2 > 0.0 ? ((p[0] - a[0]) * ux + (p[1] - a[1]) * uy) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return std::hypot(p[0] - a[0] - s * ux, p[1] - a[1] - s * uy);
}

int collar_cells(double width, double h) {
  // Tolerate round-off when width is an exact multiple of h.
  return static_cast<int>(std::ceil(width / h - 1e-9));
}

}  // namespace

double Mesh::measure(int e) const {
  if (dim == 1) return std::abs(vertex(e, 1)[0] - vertex(e, 0)[0]);
  return 0.5 * std::abs(cross2(vertex(e, 0), vertex(e, 1), vertex(e, 2)));
}

double Mesh::diameter(int e) const {
  double d = 0.0;
  for (int a = 0; a <= dim; ++a)
    for (int b = a + 1; b <= dim; ++b) d = std::max(d, distance(vertex(e, a), vertex(e, b), dim));
  return d;
}

Point Mesh::map(int e, const std::array<double, 3>& bary) const {
  Point p{0.0, 0.0};
  for (int k = 0; k <= dim; ++k) {
    const Point& v = vertex(e, k);
    p[0] += bary[k] * v[0];
    p[1] += bary[k] * v[1];
  }
  return p;
}

std::array<double, 3> Mesh::barycentric(int e, const Point& x) const {
  if (dim == 1) {
    const double a = vertex(e, 0)[0];
    const double b = vertex(e, 1)[0];
    const double s = (x[0] - a) / (b - a);
    return {1.0 - s, s, 0.0};
  }
  const Point a = vertex(e, 0);
  const Point b = vertex(e, 1);
  const Point c = vertex(e, 2);
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  const double l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
  const double l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
  return {1.0 - l1 - l2, l1, l2};
}

bool Mesh::shares_vertex(int e1, int e2) const {
  for (int a = 0; a <= dim; ++a)
    for (int b = 0; b <= dim; ++b)
      if (elements[e1][a] == elements[e2][b]) return true;
  return false;
}

double Mesh::min_distance(int e1, int e2) const {
  if (e1 == e2 || shares_vertex(e1, e2)) return 0.0;
  if (dim == 1) {
    const double a0 = std::min(vertex(e1, 0)[0], vertex(e1, 1)[0]);
    const double a1 = std::max(vertex(e1, 0)[0], vertex(e1, 1)[0]);
    const double b0 = std::min(vertex(e2, 0)[0], vertex(e2, 1)[0]);
    const double b1 = std::max(vertex(e2, 0)[0], vertex(e2, 1)[0]);
    return std::max({0.0, b0 - a1, a0 - b1});
  }
  // Conforming meshes: distinct triangles without a shared vertex do not
  // overlap, so the distance is attained between a vertex and an edge.
  double d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    for (int m = 0; m < 3; ++m) {
      d = std::min(d, point_segment_distance(vertex(e1, k), vertex(e2, m), vertex(e2, (m + 1) % 3)));
      d = std::min(d, point_segment_distance(vertex(e2, k), vertex(e1, m), vertex(e1, (m + 1) % 3)));
    }
  }
  return d;
}

double Mesh::max_distance(int e1, int e2) const {
  double d = 0.0;
  for (int a = 0; a <= dim; ++a)
    for (int b = 0; b <= dim; ++b) d = std::max(d, distance(vertex(e1, a), vertex(e2, b), dim));
  return d;
}

std::vector<int> Mesh::interaction_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < num_nodes(); ++i)
    if (is_interaction_node(i)) out.push_back(i);
  return out;
}

std::vector<int> Mesh::free_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < num_nodes(); ++i)
    if (!touches_layer[i]) out.push_back(i);
  return out;
}

void Mesh::finalize() {
  if (region.size() != elements.size()) throw std::invalid_argument("mesh: region tags must match elements");
  node_region.assign(nodes.size(), Region::interaction);
  touches_layer.assign(nodes.size(), 0);
  std::vector<char> touched(nodes.size(), 0);
  h = 0.0;
  for (int e = 0; e < num_elements(); ++e) {
    if (!(measure(e) > 0.0)) throw std::invalid_argument("mesh: degenerate element " + std::to_string(e));
    h = std::max(h, diameter(e));
    for (int k = 0; k <= dim; ++k) {
      const int n = elements[e][k];
      if (n < 0 || n >= num_nodes()) throw std::invalid_argument("mesh: element references missing node");
      touched[n] = 1;
      if (region[e] == Region::interior) node_region[n] = Region::interior;
      else touches_layer[n] = 1;
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!touched[i]) throw std::invalid_argument("mesh: orphan node " + std::to_string(i));
}

Mesh build_interval_mesh(double a, double b, int elements, double horizon, std::optional<double> collar) {
  if (!(b > a)) throw std::invalid_argument("build_interval_mesh: need a < b");
  if (elements < 2) throw std::invalid_argument("build_interval_mesh: need at least 2 elements");
  if (!(horizon > 0.0)) throw std::invalid_argument("build_interval_mesh: horizon must be positive");
  const double width = collar.value_or(horizon);
  if (!(width > 0.0)) throw std::invalid_argument("build_interval_mesh: collar must be positive");
  const double h = (b - a) / elements;
  const int nc = collar_cells(width, h);
  const int total = elements + 2 * nc;

  Mesh m;
  m.dim = 1;
  m.nodes.reserve(total + 1);
  for (int i = 0; i <= total; ++i) m.nodes.push_back({a + (i - nc) * h, 0.0});
  for (int e = 0; e < total; ++e) {
    m.elements.push_back({e, e + 1, 0});
    m.region.push_back(e >= nc && e < nc + elements ? Region::interior : Region::interaction);
  }
  m.omega = Box{{a, 0.0}, {b, 0.0}};
  m.collar = nc * h;
  m.finalize();
  return m;
}

Mesh build_box_mesh(double lx, double ly, int nx, int ny, double horizon, std::optional<double> collar) {
  if (!(lx > 0.0 && ly > 0.0)) throw std::invalid_argument("build_box_mesh: sizes must be positive");
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_box_mesh: cell counts must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("build_box_mesh: horizon must be positive");
  const double width = collar.value_or(horizon);
  if (!(width > 0.0)) throw std::invalid_argument("build_box_mesh: collar must be positive");
  const double hx = lx / nx;
  const double hy = ly / ny;
  const int cx = collar_cells(width, hx);
  const int cy = collar_cells(width, hy);
  const int tx = nx + 2 * cx;
  const int ty = ny + 2 * cy;

  Mesh m;
  m.dim = 2;
  auto id = [tx](int i, int j) { return j * (tx + 1) + i; };
  for (int j = 0; j <= ty; ++j)
    for (int i = 0; i <= tx; ++i) m.nodes.push_back({(i - cx) * hx, (j - cy) * hy});
  for (int j = 0; j < ty; ++j) {
    for (int i = 0; i < tx; ++i) {
      const bool inside = i >= cx && i < cx + nx && j >= cy && j < cy + ny;
      const Region r = inside ? Region::interior : Region::interaction;
      // counter-clockwise triangles
      m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      m.region.push_back(r);
      m.region.push_back(r);
    }
  }
  m.omega = Box{{0.0, 0.0}, {lx, ly}};
  m.collar = std::min(cx * hx, cy * hy);
  m.finalize();
  return m;
}

void write_mesh_csv(const Mesh& mesh, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CsvWriter nodes(dir / "nodes.csv");
  if (mesh.dim == 1)
    nodes.header({"id", "x"});
  else
    nodes.header({"id", "x", "y"});
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    nodes.field(i).field(mesh.nodes[i][0]);
    if (mesh.dim == 2) nodes.field(mesh.nodes[i][1]);
    nodes.end_row();
  }
  CsvWriter elems(dir / "elements.csv");
  if (mesh.dim == 1)
    elems.header({"id", "n0", "n1", "region"});
  else
    elems.header({"id", "n0", "n1", "n2", "region"});
  for (int e = 0; e < mesh.num_elements(); ++e) {
    elems.field(e);
    for (int k = 0; k <= mesh.dim; ++k) elems.field(mesh.elements[e][k]);
    elems.field(mesh.region[e] == Region::interior ? "interior" : "interaction");
    elems.end_row();
  }
}

Mesh read_mesh_csv(const std::filesystem::path& dir) {
  const auto node_rows = read_csv(dir / "nodes.csv");
  const auto elem_rows = read_csv(dir / "elements.csv");
  if (node_rows.empty() || elem_rows.empty()) throw std::runtime_error("read_mesh_csv: empty file");
  Mesh m;
  m.dim = node_rows.front().size() == 3 ? 2 : 1;
  for (std::size_t r = 1; r < node_rows.size(); ++r) {
    const auto& row = node_rows[r];
    if (static_cast<int>(row.size()) != m.dim + 1) throw std::runtime_error("read_mesh_csv: bad node row");
    m.nodes.push_back({std::stod(row[1]), m.dim == 2 ? std::stod(row[2]) : 0.0});
  }
  for (std::size_t r = 1; r < elem_rows.size(); ++r) {
    const auto& row = elem_rows[r];
    if (static_cast<int>(row.size()) != m.dim + 3) throw std::runtime_error("read_mesh_csv: bad element row");
    Element el{0, 0, 0};
    for (int k = 0; k <= m.dim; ++k) el[k] = std::stoi(row[1 + k]);
    m.elements.push_back(el);
    const std::string& tag = row.back();
    if (tag != "interior" && tag != "interaction") throw std::runtime_error("read_mesh_csv: bad region tag " + tag);
    m.region.push_back(tag == "interior" ? Region::interior : Region::interaction);
  }
  // Recover the interior bounding box from interior elements.
  Box box{{1e300, 1e300}, {-1e300, -1e300}};
  for (int e = 0; e < m.num_elements(); ++e) {
    if (m.region[e] != Region::interior) continue;
    for (int k = 0; k <= m.dim; ++k) {
      const Point& p = m.vertex(e, k);
      for (int c = 0; c < m.dim; ++c) {
        box.lo[c] = std::min(box.lo[c], p[c]);
        box.hi[c] = std::max(box.hi[c], p[c]);
      }
    }
  }
  if (m.dim == 1) box.lo[1] = box.hi[1] = 0.0;
  m.omega = box;
  double lo = 1e300;
  for (const auto& p : m.nodes) lo = std::min(lo, p[0]);
  m.collar = box.lo[0] - lo;
  m.finalize();
  return m;
}

}  // namespace nlv

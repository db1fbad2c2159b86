#pragma once
// Simplicial meshes of Omega plus its interaction collar Omega_I.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nlv/kernel.hpp"

namespace nlv {

enum class Region : std::uint8_t { interior, interaction };

using Element = std::array<int, 3>;  // dim+1 vertex indices are used

struct Mesh {
  int dim = 1;
  std::vector<Point> nodes;
  std::vector<Element> elements;
  std::vector<Region> region;       // per element
  std::vector<Region> node_region;  // interaction iff every incident element is
  std::vector<char> touches_layer;  // node of some interaction element
  double h = 0.0;                   // max element diameter
  Box omega;                        // bounding box of the interior domain
  double collar = 0.0;              // width of the interaction layer

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  int vertices_per_element() const { return dim + 1; }
  Point vertex(int e, int k) const { return nodes[elements[e][k]]; }

  double measure(int e) const;
  double diameter(int e) const;
  /// Physical point from barycentric coordinates on element e.
  Point map(int e, const std::array<double, 3>& bary) const;
  /// Barycentric coordinates of x with respect to element e (affine extension).
  std::array<double, 3> barycentric(int e, const Point& x) const;
  bool shares_vertex(int e1, int e2) const;
  /// Minimum and maximum Euclidean distance between points of two elements.
  double min_distance(int e1, int e2) const;
  double max_distance(int e1, int e2) const;

  bool is_interaction_node(int i) const { return node_region[i] == Region::interaction; }
  std::vector<int> interaction_nodes() const;
  /// Nodes of the closure of Omega_I: zeroing them makes a P1 field vanish on
  /// all of Omega_I.
  bool in_layer_closure(int i) const { return touches_layer[i] != 0; }
  /// Nodes not in the closure of Omega_I (the Dirichlet unknowns).
  std::vector<int> free_nodes() const;

  /// Recomputes node_region and h; throws if an element is degenerate.
  void finalize();
};

/// Uniform mesh of [a - c, b + c], c = ceil(collar / h) * h with h = (b-a)/elements.
/// The collar defaults to the horizon; it may be set independently when the
/// horizon exceeds the meshed domain.
Mesh build_interval_mesh(double a, double b, int elements, double horizon,
                         std::optional<double> collar = std::nullopt);

/// Structured triangulation of (0,lx) x (0,ly) (two triangles per cell) plus a
/// collar ring of whole cells of width >= collar (default: the horizon).
Mesh build_box_mesh(double lx, double ly, int nx, int ny, double horizon,
                    std::optional<double> collar = std::nullopt);

/// nodes.csv (id,x[,y]) and elements.csv (id,n0,n1[,n2],region), LF, UTF-8.
void write_mesh_csv(const Mesh& mesh, const std::filesystem::path& dir);
Mesh read_mesh_csv(const std::filesystem::path& dir);

}  // namespace nlv

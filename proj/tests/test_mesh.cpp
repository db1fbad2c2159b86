#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "nlv/mesh.hpp"

using namespace nlv;

namespace {

double total_measure(const Mesh& m, Region r) {
  double s = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    if (m.region[e] == r) s += m.measure(e);
  return s;
}

}  // namespace

TEST_CASE("interval mesh rounds the collar up to whole elements") {
  const Mesh m = build_interval_mesh(0.0, 1.0, 8, 0.3);
  CHECK(m.dim == 1);
  CHECK(m.num_elements() == 14);
  CHECK(m.num_nodes() == 15);
  CHECK(m.h == doctest::Approx(0.125));
  CHECK(m.collar == doctest::Approx(0.375));
  CHECK(m.nodes.front()[0] == doctest::Approx(-0.375));
  CHECK(m.nodes.back()[0] == doctest::Approx(1.375));
  CHECK(total_measure(m, Region::interior) == doctest::Approx(1.0));
  CHECK(total_measure(m, Region::interaction) == doctest::Approx(0.75));
  CHECK(m.interaction_nodes().size() == 6);
  const auto free = m.free_nodes();
  CHECK(free.size() == 7);
  for (int i : free) {
    CHECK(m.nodes[i][0] > 0.0);
    CHECK(m.nodes[i][0] < 1.0);
  }
  // Boundary nodes touch the layer but are not interaction nodes.
  for (int i = 0; i < m.num_nodes(); ++i)
    if (std::abs(m.nodes[i][0]) < 1e-12 || std::abs(m.nodes[i][0] - 1.0) < 1e-12) {
      CHECK(m.in_layer_closure(i));
      CHECK_FALSE(m.is_interaction_node(i));
    }
}

TEST_CASE("exact multiples do not add a spare collar element") {
  const Mesh m = build_interval_mesh(0.0, 1.0, 10, 0.3);
  CHECK(m.collar == doctest::Approx(0.3));
  CHECK(m.num_elements() == 16);
  const Mesh c = build_interval_mesh(0.0, 1.0, 10, 5.0, 0.2);
  CHECK(c.collar == doctest::Approx(0.2));
}

TEST_CASE("box mesh counts, regions and free nodes") {
  const Mesh m = build_box_mesh(1.0, 1.0, 4, 4, 0.3);
  CHECK(m.dim == 2);
  CHECK(m.num_nodes() == 81);
  CHECK(m.num_elements() == 128);
  CHECK(total_measure(m, Region::interior) == doctest::Approx(1.0));
  CHECK(total_measure(m, Region::interaction) == doctest::Approx(4.0 - 1.0));
  CHECK(m.collar == doctest::Approx(0.5));
  CHECK(m.h == doctest::Approx(std::sqrt(2.0) * 0.25));
  CHECK(m.free_nodes().size() == 9);
  CHECK(m.interaction_nodes().size() == 81 - 25);
  CHECK(m.omega.hi[0] == doctest::Approx(1.0));
}

TEST_CASE("element geometry") {
  const Mesh m = build_box_mesh(2.0, 1.0, 2, 2, 0.5);
  for (int e = 0; e < m.num_elements(); ++e) {
    CHECK(m.measure(e) == doctest::Approx(0.25));
    const Point c = m.map(e, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto b = m.barycentric(e, c);
    CHECK(b[0] == doctest::Approx(1.0 / 3));
    CHECK(b[1] == doctest::Approx(1.0 / 3));
    CHECK(b[2] == doctest::Approx(1.0 / 3));
    CHECK(m.min_distance(e, e) == 0.0);
  }
  const Mesh l = build_interval_mesh(0.0, 1.0, 4, 0.25);
  CHECK(l.min_distance(0, 3) == doctest::Approx(0.5));
  CHECK(l.max_distance(0, 3) == doctest::Approx(1.0));
  CHECK(l.shares_vertex(1, 2));
  CHECK_FALSE(l.shares_vertex(1, 3));
  CHECK(l.min_distance(1, 2) == 0.0);
}

TEST_CASE("invalid meshes are rejected") {
  CHECK_THROWS_AS(build_interval_mesh(1.0, 0.0, 4, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_interval_mesh(0.0, 1.0, 1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_interval_mesh(0.0, 1.0, 4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_box_mesh(1.0, 1.0, 0, 2, 0.2), std::invalid_argument);
  Mesh m = build_interval_mesh(0.0, 1.0, 4, 0.25);
  m.nodes[2] = m.nodes[1];
  CHECK_THROWS_AS(m.finalize(), std::invalid_argument);
}

TEST_CASE("mesh csv round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "nlv_test_mesh_csv";
  std::filesystem::remove_all(dir);
  for (const Mesh& m : {build_interval_mesh(0.0, 1.0, 6, 0.2), build_box_mesh(1.0, 2.0, 3, 4, 0.3)}) {
    write_mesh_csv(m, dir);
    const Mesh r = read_mesh_csv(dir);
    REQUIRE(r.num_nodes() == m.num_nodes());
    REQUIRE(r.num_elements() == m.num_elements());
    CHECK(r.dim == m.dim);
    for (int i = 0; i < m.num_nodes(); ++i) {
      CHECK(r.nodes[i][0] == m.nodes[i][0]);
      CHECK(r.nodes[i][1] == m.nodes[i][1]);
      CHECK(r.touches_layer[i] == m.touches_layer[i]);
    }
    CHECK(r.region == m.region);
    CHECK(r.omega.lo[0] == doctest::Approx(m.omega.lo[0]));
    CHECK(r.omega.hi[m.dim - 1] == doctest::Approx(m.omega.hi[m.dim - 1]));
  }
  std::filesystem::remove_all(dir);
}

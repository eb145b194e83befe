#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "edd/errors.hpp"
#include "edd/mesh.hpp"

using namespace edd;

namespace {

constexpr double pi = std::numbers::pi;

// brute force over every triangle edge
double brute_max_edge(const TriMesh& m) {
  double h = 0.0;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) {
      const auto& a = m.vertices[t[i]];
      const auto& b = m.vertices[t[(i + 1) % 3]];
      h = std::max(h, std::hypot(a.x - b.x, a.y - b.y));
    }
  return h;
}

// vertex coordinates rounded to a lattice, sorted
std::vector<std::pair<long long, long long>> canonical_vertices(const TriMesh& m) {
  std::vector<std::pair<long long, long long>> v;
  for (const auto& p : m.vertices) v.emplace_back(std::llround(p.x * 1e9), std::llround(p.y * 1e9));
  std::sort(v.begin(), v.end());
  return v;
}

std::set<std::array<std::pair<long long, long long>, 3>> canonical_triangles(const TriMesh& m) {
  std::set<std::array<std::pair<long long, long long>, 3>> s;
  for (const auto& t : m.triangles) {
    std::array<std::pair<long long, long long>, 3> c;
    for (int i = 0; i < 3; ++i)
      c[i] = {std::llround(m.vertices[t[i]].x * 1e9), std::llround(m.vertices[t[i]].y * 1e9)};
    std::sort(c.begin(), c.end());
    s.insert(c);
  }
  return s;
}

int count_edges(const TriMesh& m) {
  std::set<std::pair<int, int>> e;
  for (const auto& t : m.triangles)
    for (int i = 0; i < 3; ++i) e.insert(std::minmax(t[i], t[(i + 1) % 3]));
  return static_cast<int>(e.size());
}

}  // namespace

TEST_CASE("rect mesh counts") {
  auto m = build_rect_mesh({0, 1}, {0, 1}, 1, 1);
  CHECK(m.num_vertices() == 4);
  CHECK(m.num_triangles() == 2);

  m = build_rect_mesh({0, pi}, {0, 1}, 4, 4);
  CHECK(m.num_vertices() == 25);
  CHECK(m.num_triangles() == 32);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) CHECK(m.signed_area(t) > 0.0);
}

TEST_CASE("mesh size is the cell hypotenuse") {
  auto m = build_rect_mesh({0, pi}, {0, 1}, 50, 16);
  const double hyp = std::hypot(pi / 50, 1.0 / 16);
  CHECK(m.h == doctest::Approx(hyp).epsilon(1e-14));
  CHECK(max_edge_length(m) == doctest::Approx(brute_max_edge(m)).epsilon(1e-15));
}

TEST_CASE("sw-ne diagonal") {
  auto m = build_rect_mesh({0, 2}, {0, 1}, 2, 1);
  // every triangle has an edge joining a cell's SW and NE corners
  for (const auto& t : m.triangles) {
    bool diag = false;
    for (int i = 0; i < 3; ++i) {
      const auto& a = m.vertices[t[i]];
      const auto& b = m.vertices[t[(i + 1) % 3]];
      const double dx = b.x - a.x, dy = b.y - a.y;
      if (std::abs(std::abs(dx) - 1.0) < 1e-12 && std::abs(std::abs(dy) - 1.0) < 1e-12 && dx * dy > 0) diag = true;
    }
    CHECK(diag);
  }
}

TEST_CASE("bad input") {
  CHECK_THROWS_AS(build_rect_mesh({0, 1}, {0, 1}, 0, 1), InputError);
  CHECK_THROWS_AS(build_rect_mesh({1, 1}, {0, 1}, 2, 2), InputError);
  CHECK_THROWS_AS(build_coupled_meshes(0.0), InputError);
  CHECK_THROWS_AS(build_coupled_meshes(-0.5), InputError);
}

TEST_CASE("coupled meshes") {
  auto cm = build_coupled_meshes(1.0 / 16);
  CHECK(cm.h_nominal == doctest::Approx(1.0 / 16));
  CHECK(cm.fluid.num_triangles() == 2u * 50 * 16);
  CHECK(cm.porous.num_triangles() == 2u * 50 * 16);
  CHECK(cm.interface.num_nodes() == 51);
  CHECK(cm.interface.length() == doctest::Approx(pi).epsilon(1e-14));
  double worst = 0.0;
  for (std::size_t i = 0; i < cm.interface.num_nodes(); ++i) {
    const auto& a = cm.fluid.vertices[cm.interface.fluid_nodes[i]];
    const auto& b = cm.porous.vertices[cm.interface.porous_nodes[i]];
    worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y)});
    CHECK(a.y == 0.0);
    CHECK(a.x == cm.interface.x[i]);
  }
  CHECK(worst == 0.0);
  CHECK(std::is_sorted(cm.interface.x.begin(), cm.interface.x.end()));

  auto c8 = build_coupled_meshes(1.0 / 8);
  CHECK(c8.fluid.num_triangles() == 400);
}

TEST_CASE("area sums") {
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    auto cm = build_coupled_meshes(h);
    CHECK(std::abs(cm.fluid.total_area() - pi) < 1e-12 * pi);
    CHECK(std::abs(cm.porous.total_area() - pi) < 1e-12 * pi);
    auto r = refine(cm);
    CHECK(std::abs(r.fluid.total_area() - pi) < 1e-12 * pi);
    CHECK(std::abs(r.porous.total_area() - pi) < 1e-12 * pi);
  }
}

TEST_CASE("interface edges are tagged") {
  auto cm = build_coupled_meshes(1.0 / 8);
  int fl = 0, po = 0;
  for (const auto& e : cm.fluid.boundary_edges)
    if (e.tag == BoundaryTag::interface) {
      ++fl;
      CHECK(cm.fluid.vertices[e.v[0]].y == 0.0);
      CHECK(cm.fluid.vertices[e.v[1]].y == 0.0);
    }
  for (const auto& e : cm.porous.boundary_edges)
    if (e.tag == BoundaryTag::interface) ++po;
  CHECK(fl == 25);
  CHECK(po == 25);
  // all boundary edges: 2 (nx + ny)
  CHECK(cm.fluid.boundary_edges.size() == 2u * (25 + 8));
  auto dir = cm.fluid.dirichlet_vertices();
  // interface interior nodes are not Dirichlet, the two ends are
  CHECK(dir[cm.interface.fluid_nodes.front()]);
  CHECK(dir[cm.interface.fluid_nodes.back()]);
  CHECK_FALSE(dir[cm.interface.fluid_nodes[3]]);
}

TEST_CASE("refine bookkeeping") {
  auto sq = build_rect_mesh({0, 1}, {0, 1}, 1, 1);
  auto r = refine(sq);
  CHECK(r.num_triangles() == 8);
  CHECK(r.num_vertices() == 9);
  CHECK(r.level == sq.level + 1);

  auto m = build_rect_mesh({0, pi}, {-1, 0}, 7, 5);
  auto rm = refine(m);
  CHECK(rm.num_triangles() == 4 * m.num_triangles());
  CHECK(rm.num_vertices() == m.num_vertices() + count_edges(m));
  CHECK(rm.h == doctest::Approx(m.h / 2).epsilon(1e-14));
  for (std::size_t t = 0; t < rm.num_triangles(); ++t) CHECK(rm.signed_area(t) > 0.0);
}

TEST_CASE("nestedness") {
  auto m = build_rect_mesh({0, pi}, {0, 1}, 6, 3);
  auto r = refine(m);
  // coarse vertices keep their indices
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    CHECK(r.vertices[i].x == m.vertices[i].x);
    CHECK(r.vertices[i].y == m.vertices[i].y);
  }
}

TEST_CASE("refined interface bisects the coarse one") {
  auto cm = build_coupled_meshes(1.0 / 8);
  auto r = refine(cm);
  REQUIRE(r.interface.num_nodes() == 2 * cm.interface.num_nodes() - 1);
  for (std::size_t e = 0; e < cm.interface.num_edges(); ++e) {
    CHECK(r.interface.x[2 * e] == cm.interface.x[e]);
    CHECK(r.interface.x[2 * e + 1] == doctest::Approx(0.5 * (cm.interface.x[e] + cm.interface.x[e + 1])).epsilon(1e-15));
  }
  for (std::size_t i = 0; i < r.interface.num_nodes(); ++i) {
    const auto& a = r.fluid.vertices[r.interface.fluid_nodes[i]];
    const auto& b = r.porous.vertices[r.interface.porous_nodes[i]];
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
  }
}

TEST_CASE("refine matches a direct build with twice the cells") {
  // nx is set at the coarse level, so compare against a 2nx x 2ny build
  auto cm = build_coupled_meshes(1.0 / 16);
  auto r = refine(cm);
  auto direct = build_rect_mesh({0, pi}, {0, 1}, 100, 32);
  CHECK(canonical_vertices(r.fluid) == canonical_vertices(direct));
  CHECK(canonical_triangles(r.fluid) == canonical_triangles(direct));
}

TEST_CASE("nested family") {
  auto a = nested_meshes(0.25, 1.0 / 32);
  CHECK(a.fluid.num_triangles() == 2u * 104 * 32);
  CHECK(a.h_nominal == doctest::Approx(1.0 / 32));
  CHECK_THROWS_AS(nested_meshes(0.25, 0.1), InputError);
}

TEST_CASE("mesh dump") {
  auto m = build_rect_mesh({0, 1}, {0, 1}, 1, 1);
  std::ostringstream os;
  write_mesh(os, m);
  std::istringstream is(os.str());
  int v = 0, t = 0, b = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("t ", 0) == 0) ++t;
    if (line.rfind("b ", 0) == 0) ++b;
  }
  CHECK(v == 4);
  CHECK(t == 2);
  CHECK(b == 4);
}

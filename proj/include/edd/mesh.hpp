#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

namespace edd {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};
using Point = Vec2;

enum class BoundaryTag { exterior_dirichlet, interface };

struct BoundaryEdge {
  std::array<int, 2> v;
  BoundaryTag tag;
};

struct Interval {
  double lo;
  double hi;
};

struct TriMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<BoundaryEdge> boundary_edges;
  double h = 0.0;  // max edge length
  int level = 0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  double signed_area(std::size_t t) const;
  double total_area() const;
  // true for vertices touching an exterior_dirichlet edge
  std::vector<char> dirichlet_vertices() const;
};

// Matched node lists on y = 0. edges[e] joins positions e and e+1.
struct InterfaceMap {
  std::vector<int> fluid_nodes;
  std::vector<int> porous_nodes;
  std::vector<double> x;                 // node abscissae, increasing
  std::vector<int> fluid_edge_triangle;  // element owning edge e on each side
  std::vector<int> porous_edge_triangle;
  Vec2 normal_fluid{0.0, -1.0};
  Vec2 normal_porous{0.0, 1.0};
  Vec2 tangent{1.0, 0.0};

  std::size_t num_nodes() const { return x.size(); }
  std::size_t num_edges() const { return x.empty() ? 0 : x.size() - 1; }
  double length() const { return x.empty() ? 0.0 : x.back() - x.front(); }
};

struct CoupledMeshes {
  TriMesh fluid;
  TriMesh porous;
  InterfaceMap interface;
  double h_nominal = 0.0;  // 1/ny, the h used in formulas
};

TriMesh build_rect_mesh(Interval x, Interval y, int nx, int ny);
CoupledMeshes build_coupled_meshes(double h_target);
TriMesh refine(const TriMesh& mesh);
CoupledMeshes refine(const CoupledMeshes& meshes);
// refine^k(build_coupled_meshes(base_h)) with h = base_h / 2^k
CoupledMeshes nested_meshes(double base_h, double h);
InterfaceMap match_interface(const TriMesh& fluid, const TriMesh& porous);
double max_edge_length(const TriMesh& mesh);

void write_mesh(std::ostream& os, const TriMesh& mesh);

}  // namespace edd

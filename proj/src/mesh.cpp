#include "edd/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <unordered_map>

#include "edd/errors.hpp"

namespace edd {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

BoundaryTag tag_for(const Point& a, const Point& b) {
  return (a.y == 0.0 && b.y == 0.0) ? BoundaryTag::interface : BoundaryTag::exterior_dirichlet;
}

}  // namespace

double TriMesh::signed_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point& a = vertices[tri[0]];
  const Point& b = vertices[tri[1]];
  const Point& c = vertices[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double TriMesh::total_area() const {
  double s = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) s += signed_area(t);
  return s;
}

std::vector<char> TriMesh::dirichlet_vertices() const {
  std::vector<char> flag(vertices.size(), 0);
  for (const auto& e : boundary_edges)
    if (e.tag == BoundaryTag::exterior_dirichlet) flag[e.v[0]] = flag[e.v[1]] = 1;
  return flag;
}

double max_edge_length(const TriMesh& mesh) {
  double h = 0.0;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      h = std::max(h, dist(mesh.vertices[t[k]], mesh.vertices[t[(k + 1) % 3]]));
  return h;
}

TriMesh build_rect_mesh(Interval x, Interval y, int nx, int ny) {
  require(nx >= 1 && ny >= 1, "build_rect_mesh: cell counts must be positive");
  require(std::isfinite(x.lo) && std::isfinite(x.hi) && x.hi > x.lo, "build_rect_mesh: bad x range");
  require(std::isfinite(y.lo) && std::isfinite(y.hi) && y.hi > y.lo, "build_rect_mesh: bad y range");

  TriMesh m;
  m.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  // i/n written as a quotient of integers so that the nodes of an n-mesh are
  // bit-identical to the even nodes of the 2n-mesh
  auto coord = [](Interval r, int i, int n) {
    if (i == n) return r.hi;
    return r.lo + (r.hi - r.lo) * (static_cast<double>(i) / static_cast<double>(n));
  };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back({coord(x, i, nx), coord(y, j, ny)});

  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  m.triangles.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int sw = id(i, j), se = id(i + 1, j), ne = id(i + 1, j + 1), nw = id(i, j + 1);
      m.triangles.push_back({sw, se, ne});
      m.triangles.push_back({sw, ne, nw});
    }

  auto add = [&m](int a, int b) {
    m.boundary_edges.push_back({{a, b}, tag_for(m.vertices[a], m.vertices[b])});
  };
  for (int i = 0; i < nx; ++i) add(id(i, 0), id(i + 1, 0));
  for (int j = 0; j < ny; ++j) add(id(nx, j), id(nx, j + 1));
  for (int i = nx; i > 0; --i) add(id(i, ny), id(i - 1, ny));
  for (int j = ny; j > 0; --j) add(id(0, j), id(0, j - 1));

  m.h = max_edge_length(m);
  return m;
}

TriMesh refine(const TriMesh& mesh) {
  TriMesh f;
  f.vertices = mesh.vertices;
  f.level = mesh.level + 1;
  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(mesh.triangles.size() * 2);
  auto midpoint = [&](int a, int b) {
    auto [it, fresh] = mid.try_emplace(edge_key(a, b), static_cast<int>(f.vertices.size()));
    if (fresh) {
      const Point& p = mesh.vertices[a];
      const Point& q = mesh.vertices[b];
      f.vertices.push_back({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)});
    }
    return it->second;
  };
  f.triangles.reserve(mesh.triangles.size() * 4);
  for (const auto& t : mesh.triangles) {
    const int a = t[0], b = t[1], c = t[2];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    f.triangles.push_back({a, ab, ca});
    f.triangles.push_back({ab, b, bc});
    f.triangles.push_back({ca, bc, c});
    f.triangles.push_back({ab, bc, ca});
  }
  for (const auto& e : mesh.boundary_edges) {
    const int m = mid.at(edge_key(e.v[0], e.v[1]));
    f.boundary_edges.push_back({{e.v[0], m}, e.tag});
    f.boundary_edges.push_back({{m, e.v[1]}, e.tag});
  }
  f.h = max_edge_length(f);
  return f;
}

InterfaceMap match_interface(const TriMesh& fluid, const TriMesh& porous) {
  auto collect = [](const TriMesh& m) {
    std::vector<int> nodes;
    for (const auto& e : m.boundary_edges)
      if (e.tag == BoundaryTag::interface) nodes.insert(nodes.end(), {e.v[0], e.v[1]});
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::sort(nodes.begin(), nodes.end(),
              [&m](int a, int b) { return m.vertices[a].x < m.vertices[b].x; });
    return nodes;
  };
  InterfaceMap im;
  im.fluid_nodes = collect(fluid);
  im.porous_nodes = collect(porous);
  require(im.fluid_nodes.size() >= 2, "match_interface: no interface edges");
  require(im.fluid_nodes.size() == im.porous_nodes.size(), "match_interface: node counts differ");
  for (std::size_t k = 0; k < im.fluid_nodes.size(); ++k) {
    const Point& a = fluid.vertices[im.fluid_nodes[k]];
    const Point& b = porous.vertices[im.porous_nodes[k]];
    require(a.x == b.x && a.y == 0.0 && b.y == 0.0, "match_interface: nonmatching interface nodes");
    im.x.push_back(a.x);
  }

  auto owners = [](const TriMesh& m, const std::vector<int>& nodes) {
    std::unordered_map<std::uint64_t, int> pos;
    for (std::size_t e = 0; e + 1 < nodes.size(); ++e) pos[edge_key(nodes[e], nodes[e + 1])] = static_cast<int>(e);
    std::vector<int> owner(nodes.size() - 1, -1);
    for (std::size_t t = 0; t < m.triangles.size(); ++t)
      for (int k = 0; k < 3; ++k) {
        auto it = pos.find(edge_key(m.triangles[t][k], m.triangles[t][(k + 1) % 3]));
        if (it != pos.end()) owner[it->second] = static_cast<int>(t);
      }
    for (int o : owner) require(o >= 0, "match_interface: interface nodes are not consecutive edges");
    return owner;
  };
  im.fluid_edge_triangle = owners(fluid, im.fluid_nodes);
  im.porous_edge_triangle = owners(porous, im.porous_nodes);
  return im;
}

CoupledMeshes build_coupled_meshes(double h_target) {
  require(h_target > 0.0 && std::isfinite(h_target), "build_coupled_meshes: h must be positive");
  const int ny = static_cast<int>(std::lround(1.0 / h_target));
  const int nx = static_cast<int>(std::lround(M_PI / h_target));
  require(ny >= 1 && nx >= 1, "build_coupled_meshes: h too large");
  CoupledMeshes cm;
  cm.fluid = build_rect_mesh({0.0, M_PI}, {0.0, 1.0}, nx, ny);
  cm.porous = build_rect_mesh({0.0, M_PI}, {-1.0, 0.0}, nx, ny);
  cm.interface = match_interface(cm.fluid, cm.porous);
  cm.h_nominal = 1.0 / ny;
  return cm;
}

CoupledMeshes refine(const CoupledMeshes& meshes) {
  CoupledMeshes cm;
  cm.fluid = refine(meshes.fluid);
  cm.porous = refine(meshes.porous);
  cm.interface = match_interface(cm.fluid, cm.porous);
  cm.h_nominal = 0.5 * meshes.h_nominal;
  return cm;
}

CoupledMeshes nested_meshes(double base_h, double h) {
  require(base_h > 0.0 && h > 0.0 && h <= base_h, "nested_meshes: need 0 < h <= base_h");
  const double k = std::log2(base_h / h);
  require(std::abs(k - std::round(k)) < 1e-9, "nested_meshes: base_h / h must be a power of two");
  CoupledMeshes cm = build_coupled_meshes(base_h);
  for (int i = 0; i < static_cast<int>(std::lround(k)); ++i) cm = refine(cm);
  return cm;
}

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os.precision(17);
  for (const auto& v : mesh.vertices) os << "v " << v.x << ' ' << v.y << '\n';
  for (const auto& t : mesh.triangles) os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.boundary_edges)
    os << "b " << e.v[0] << ' ' << e.v[1] << ' '
       << (e.tag == BoundaryTag::interface ? "interface" : "exterior_dirichlet") << '\n';
}

}  // namespace edd

#include "edd/fem.hpp"

#include <cmath>

#include "edd/errors.hpp"
#include "edd/quadrature.hpp"

namespace edd {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

Vec2 at_bary(const TriMesh& m, const std::array<int, 3>& v, const std::array<double, 3>& b) {
  const Point& p0 = m.vertices[v[0]];
  const Point& p1 = m.vertices[v[1]];
  const Point& p2 = m.vertices[v[2]];
  return {b[0] * p0.x + b[1] * p1.x + b[2] * p2.x, b[0] * p0.y + b[1] * p1.y + b[2] * p2.y};
}

double bubble(const std::array<double, 3>& b) { return 27.0 * b[0] * b[1] * b[2]; }

Vec2 bubble_grad(const ElementGeometry& el, const std::array<double, 3>& b) {
  const double c0 = 27.0 * b[1] * b[2], c1 = 27.0 * b[0] * b[2], c2 = 27.0 * b[0] * b[1];
  return {c0 * el.grad[0].x + c1 * el.grad[1].x + c2 * el.grad[2].x,
          c0 * el.grad[0].y + c1 * el.grad[1].y + c2 * el.grad[2].y};
}

double comp(const Vec2& v, int c) { return c == 0 ? v.x : v.y; }

// Split a compressed matrix over `full` dofs into free-free and free-fixed parts.
void split(const Eigen::SparseMatrix<double>& full, const std::vector<int>& free_index, int nfree,
           Eigen::SparseMatrix<double>& ff, Eigen::SparseMatrix<double>& lift) {
  Triplets a, l;
  a.reserve(full.nonZeros());
  for (int col = 0; col < full.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it) {
      const int fr = free_index[it.row()];
      if (fr < 0) continue;
      const int fc = free_index[col];
      if (fc >= 0)
        a.emplace_back(fr, fc, it.value());
      else
        l.emplace_back(fr, col, it.value());
    }
  ff.resize(nfree, nfree);
  ff.setFromTriplets(a.begin(), a.end());
  ff.makeCompressed();
  lift.resize(nfree, full.cols());
  lift.setFromTriplets(l.begin(), l.end());
  lift.makeCompressed();
}

bool positive(const DiagTensor& k) { return k.k11 > 0.0 && k.k22 > 0.0 && std::isfinite(k.k11) && std::isfinite(k.k22); }

}  // namespace

ElementGeometry element_geometry(const TriMesh& mesh, std::size_t t) {
  ElementGeometry el;
  el.v = mesh.triangles[t];
  const Point& a = mesh.vertices[el.v[0]];
  const Point& b = mesh.vertices[el.v[1]];
  const Point& c = mesh.vertices[el.v[2]];
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  el.area = 0.5 * det;
  el.grad[0] = {(b.y - c.y) / det, (c.x - b.x) / det};
  el.grad[1] = {(c.y - a.y) / det, (a.x - c.x) / det};
  el.grad[2] = {(a.y - b.y) / det, (b.x - a.x) / det};
  return el;
}

FeSpaces::FeSpaces(CoupledMeshes meshes) : meshes_(std::move(meshes)) {
  for (std::size_t t = 0; t < meshes_.fluid.num_triangles(); ++t) {
    fluid_el_.push_back(element_geometry(meshes_.fluid, t));
    require(fluid_el_.back().area > 0.0, "FeSpaces: fluid triangle with nonpositive area");
  }
  for (std::size_t t = 0; t < meshes_.porous.num_triangles(); ++t) {
    porous_el_.push_back(element_geometry(meshes_.porous, t));
    require(porous_el_.back().area > 0.0, "FeSpaces: porous triangle with nonpositive area");
  }
  velocity_fixed_ = meshes_.fluid.dirichlet_vertices();
  head_fixed_ = meshes_.porous.dirichlet_vertices();

  const auto& im = meshes_.interface;
  const auto& sr = segment_rule();
  const int n = static_cast<int>(im.num_nodes());
  Triplets m;
  for (std::size_t e = 0; e + 1 < im.num_nodes(); ++e) {
    const double len = im.x[e + 1] - im.x[e];
    for (int q = 0; q < SegmentRule::size; ++q) {
      gamma_points_.push_back({im.x[e] + sr.t[q] * len, 0.0});
      gamma_weights_.push_back(sr.weight[q] * len);
    }
    const int i = static_cast<int>(e);
    m.emplace_back(i, i, len / 3.0);
    m.emplace_back(i + 1, i + 1, len / 3.0);
    m.emplace_back(i, i + 1, len / 6.0);
    m.emplace_back(i + 1, i, len / 6.0);
  }
  trace_mass_.resize(n, n);
  trace_mass_.setFromTriplets(m.begin(), m.end());
}

SpacesPtr make_spaces(CoupledMeshes meshes) { return std::make_shared<const FeSpaces>(std::move(meshes)); }

int FeSpaces::size(FieldKind kind) const {
  switch (kind) {
    case FieldKind::velocity: return 2 * nv_fluid() + 2 * nt_fluid();
    case FieldKind::pressure: return nv_fluid();
    case FieldKind::head: return nv_porous();
    case FieldKind::trace: return n_trace();
  }
  return 0;
}

FieldVector FeSpaces::zero(FieldKind kind) const { return {kind, Eigen::VectorXd::Zero(size(kind))}; }

double FeSpaces::trace_norm(const Eigen::VectorXd& t) const {
  return std::sqrt(std::max(0.0, t.dot(trace_mass_ * t)));
}

std::vector<Vec2> FeSpaces::porous_points() const {
  const auto& tr = triangle_rule();
  std::vector<Vec2> pts;
  pts.reserve(porous_el_.size() * TriangleRule::size);
  for (const auto& el : porous_el_)
    for (int q = 0; q < TriangleRule::size; ++q) pts.push_back(at_bary(meshes_.porous, el.v, tr.bary[q]));
  return pts;
}

std::vector<double> FeSpaces::porous_weights() const {
  const auto& tr = triangle_rule();
  std::vector<double> w;
  w.reserve(porous_el_.size() * TriangleRule::size);
  for (const auto& el : porous_el_)
    for (int q = 0; q < TriangleRule::size; ++q) w.push_back(el.area * tr.weight[q]);
  return w;
}

std::vector<DiagTensor> cell_integrals(const FeSpaces& spaces, const TensorFn& k) {
  const auto& tr = triangle_rule();
  std::vector<DiagTensor> out;
  out.reserve(spaces.porous_elements().size());
  for (const auto& el : spaces.porous_elements()) {
    DiagTensor s{0.0, 0.0};
    for (int q = 0; q < TriangleRule::size; ++q) {
      const Vec2 x = at_bary(spaces.porous_mesh(), el.v, tr.bary[q]);
      const DiagTensor kq = k(x.x, x.y);
      require(positive(kq), "conductivity must be positive definite");
      s.k11 += tr.weight[q] * kq.k11;
      s.k22 += tr.weight[q] * kq.k22;
    }
    out.push_back({s.k11 * el.area, s.k22 * el.area});
  }
  return out;
}

std::vector<DiagTensor> cell_integrals(const FeSpaces& spaces, const std::vector<DiagTensor>& at_points) {
  const auto& tr = triangle_rule();
  require(at_points.size() == spaces.porous_elements().size() * TriangleRule::size,
          "cell_integrals: one value per porous quadrature point expected");
  std::vector<DiagTensor> out;
  out.reserve(spaces.porous_elements().size());
  std::size_t i = 0;
  for (const auto& el : spaces.porous_elements()) {
    DiagTensor s{0.0, 0.0};
    for (int q = 0; q < TriangleRule::size; ++q, ++i) {
      require(positive(at_points[i]), "conductivity must be positive definite");
      s.k11 += tr.weight[q] * at_points[i].k11;
      s.k22 += tr.weight[q] * at_points[i].k22;
    }
    out.push_back({s.k11 * el.area, s.k22 * el.area});
  }
  return out;
}

std::vector<double> interface_eta(const FeSpaces& spaces, const TensorFn& k, double alpha) {
  std::vector<double> eta;
  eta.reserve(spaces.gamma_points().size());
  for (const auto& p : spaces.gamma_points()) {
    const DiagTensor kq = k(p.x, p.y);
    require(positive(kq), "conductivity must be positive definite");
    eta.push_back(alpha / std::sqrt(kq.k11));  // tau = (1,0)
  }
  return eta;
}

Eigen::Matrix<double, 11, 11> stokes_element_matrix(const TriMesh& mesh, std::size_t t, double nu) {
  const ElementGeometry el = element_geometry(mesh, t);
  const auto& tr = triangle_rule();
  Eigen::Matrix<double, 11, 11> e = Eigen::Matrix<double, 11, 11>::Zero();
  // scalar shapes 0..2 = barycentric, 3 = bubble; velocity dof (c, s)
  auto vdof = [](int c, int s) { return s < 3 ? 3 * c + s : 9 + c; };
  for (int q = 0; q < TriangleRule::size; ++q) {
    const auto& b = tr.bary[q];
    const double w = tr.weight[q] * el.area;
    std::array<Vec2, 4> gs{el.grad[0], el.grad[1], el.grad[2], bubble_grad(el, b)};
    for (int c = 0; c < 2; ++c)
      for (int s = 0; s < 4; ++s)
        for (int d = 0; d < 2; ++d)
          for (int r = 0; r < 4; ++r) {
            double v = comp(gs[s], d) * comp(gs[r], c);
            if (c == d) v += gs[s].x * gs[r].x + gs[s].y * gs[r].y;
            e(vdof(c, s), vdof(d, r)) += w * nu * v;
          }
    for (int c = 0; c < 2; ++c)
      for (int s = 0; s < 4; ++s)
        for (int k = 0; k < 3; ++k) {
          const double v = -w * comp(gs[s], c) * b[k];
          e(vdof(c, s), 6 + k) += v;
          e(6 + k, vdof(c, s)) += v;
        }
  }
  return e;
}

// ---------------------------------------------------------------- Stokes

StokesOperator::StokesOperator(SpacesPtr spaces, double nu, double gamma_f, std::vector<double> eta_bar,
                               bool with_robin)
    : spaces_(std::move(spaces)), nu_(nu), gamma_f_(with_robin ? gamma_f : 0.0), eta_bar_(std::move(eta_bar)) {
  require(nu > 0.0, "assemble_stokes_operator: viscosity must be positive");
  require(gamma_f > 0.0 || !with_robin, "assemble_stokes_operator: gamma_f must be positive");
  const FeSpaces& sp = *spaces_;
  require(static_cast<int>(eta_bar_.size()) == sp.n_gamma_points(),
          "assemble_stokes_operator: eta_bar must be given at interface quadrature points");
  for (double v : eta_bar_) require(v > 0.0, "assemble_stokes_operator: eta_bar must be positive");

  const int nv = sp.nv_fluid();
  const int ndof = 3 * nv;
  Triplets trip;
  trip.reserve(sp.fluid_elements().size() * 81 + 8 * sp.n_gamma_points());
  bubble_inv_.resize(sp.fluid_elements().size());
  bubble_coupling_.resize(sp.fluid_elements().size());
  for (std::size_t t = 0; t < sp.fluid_elements().size(); ++t) {
    const auto e = stokes_element_matrix(sp.fluid_mesh(), t, nu);
    const Eigen::Matrix2d ebb = e.block<2, 2>(9, 9);
    bubble_inv_[t] = ebb.inverse();
    bubble_coupling_[t] = e.block<2, 9>(9, 0);
    const Eigen::Matrix<double, 9, 9> c =
        e.block<9, 9>(0, 0) - bubble_coupling_[t].transpose() * bubble_inv_[t] * bubble_coupling_[t];
    const auto& v = sp.fluid_elements()[t].v;
    int g[9];
    for (int k = 0; k < 3; ++k) {
      g[k] = v[k];
      g[3 + k] = nv + v[k];
      g[6 + k] = 2 * nv + v[k];
    }
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j)
        if (c(i, j) != 0.0) trip.emplace_back(g[i], g[j], c(i, j));
  }

  const auto& im = sp.interface();
  const auto& sr = segment_rule();
  for (std::size_t e = 0; e + 1 < im.num_nodes(); ++e) {
    const int n[2] = {im.fluid_nodes[e], im.fluid_nodes[e + 1]};
    for (int q = 0; q < SegmentRule::size; ++q) {
      const double w = sp.gamma_weights()[e * 3 + q];
      const double l[2] = {1.0 - sr.t[q], sr.t[q]};
      const double eta = eta_bar_[e * 3 + q];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          if (with_robin) trip.emplace_back(nv + n[a], nv + n[b], gamma_f * w * l[a] * l[b]);  // n_f = (0,-1)
          trip.emplace_back(n[a], n[b], eta * w * l[a] * l[b]);               // tangential part
        }
    }
  }
  Eigen::SparseMatrix<double> full(ndof, ndof);
  full.setFromTriplets(trip.begin(), trip.end());
  full.makeCompressed();

  free_index_.assign(ndof, -1);
  const auto& fixed = sp.velocity_fixed();
  for (int d = 0; d < ndof; ++d) {
    const bool is_fixed = d < 2 * nv && fixed[d % nv];
    if (!is_fixed) {
      free_index_[d] = static_cast<int>(free_of_.size());
      free_of_.push_back(d);
    }
  }
  split(full, free_index_, num_free(), system_.matrix, lift_);
  system_.symmetric = true;
  system_.spd = false;
}

void StokesOperator::element_load(std::size_t t, const SampleProblem& problem, Eigen::Matrix<double, 9, 1>& rr,
                                  Eigen::Vector2d& rb) const {
  rr.setZero();
  rb.setZero();
  if (!problem.body_force && !problem.mass_source) return;
  const auto& el = spaces_->fluid_elements()[t];
  const auto& tr = triangle_rule();
  for (int q = 0; q < TriangleRule::size; ++q) {
    const auto& b = tr.bary[q];
    const double w = tr.weight[q] * el.area;
    const Vec2 x = at_bary(spaces_->fluid_mesh(), el.v, b);
    if (problem.body_force) {
      const Vec2 f = problem.body_force(x.x, x.y);
      for (int k = 0; k < 3; ++k) {
        rr(k) += w * f.x * b[k];
        rr(3 + k) += w * f.y * b[k];
      }
      const double bb = bubble(b);
      rb(0) += w * f.x * bb;
      rb(1) += w * f.y * bb;
    }
    if (problem.mass_source) {
      const double m = problem.mass_source(x.x, x.y);
      for (int k = 0; k < 3; ++k) rr(6 + k) -= w * m * b[k];
    }
  }
}

Eigen::VectorXd StokesOperator::dirichlet_values(const SampleProblem& problem) const {
  const FeSpaces& sp = *spaces_;
  const int nv = sp.nv_fluid();
  Eigen::VectorXd xd = Eigen::VectorXd::Zero(3 * nv);
  if (!problem.velocity_boundary) return xd;
  for (int v = 0; v < nv; ++v)
    if (sp.velocity_fixed()[v]) {
      const Point& p = sp.fluid_mesh().vertices[v];
      const Vec2 u = problem.velocity_boundary(p.x, p.y);
      xd(v) = u.x;
      xd(nv + v) = u.y;
    }
  return xd;
}

Eigen::VectorXd StokesOperator::static_rhs(const SampleProblem& problem) const {
  const FeSpaces& sp = *spaces_;
  const int nv = sp.nv_fluid();
  Eigen::VectorXd full = Eigen::VectorXd::Zero(3 * nv);
  Eigen::Matrix<double, 9, 1> rr;
  Eigen::Vector2d rb;
  for (std::size_t t = 0; t < sp.fluid_elements().size(); ++t) {
    element_load(t, problem, rr, rb);
    const Eigen::Matrix<double, 9, 1> c = rr - bubble_coupling_[t].transpose() * (bubble_inv_[t] * rb);
    const auto& v = sp.fluid_elements()[t].v;
    for (int k = 0; k < 3; ++k) {
      full(v[k]) += c(k);
      full(nv + v[k]) += c(3 + k);
      full(2 * nv + v[k]) += c(6 + k);
    }
  }
  if (problem.tangential_traction) {
    const auto& im = sp.interface();
    const auto& sr = segment_rule();
    for (std::size_t e = 0; e + 1 < im.num_nodes(); ++e)
      for (int q = 0; q < SegmentRule::size; ++q) {
        const Vec2& x = sp.gamma_points()[e * 3 + q];
        const double s = problem.tangential_traction(x.x, x.y) * sp.gamma_weights()[e * 3 + q];
        full(im.fluid_nodes[e]) -= s * (1.0 - sr.t[q]);
        full(im.fluid_nodes[e + 1]) -= s * sr.t[q];
      }
  }
  Eigen::VectorXd rhs(num_free());
  for (int i = 0; i < num_free(); ++i) rhs(i) = full(free_of_[i]);
  rhs -= lift_ * dirichlet_values(problem);
  return rhs;
}

void StokesOperator::add_trace(Eigen::VectorXd& rhs, const Eigen::VectorXd& delta_f) const {
  const FeSpaces& sp = *spaces_;
  require(delta_f.size() == sp.n_trace(), "add_trace: trace length mismatch");
  const Eigen::VectorXd md = sp.trace_mass() * delta_f;
  const int nv = sp.nv_fluid();
  for (int k = 0; k < sp.n_trace(); ++k) {
    const int f = free_index_[nv + sp.interface().fluid_nodes[k]];
    if (f >= 0) rhs(f) -= md(k);  // v.n_f = -v_y
  }
}

void StokesOperator::add_tangential_correction(Eigen::VectorXd& rhs, const std::vector<double>& eta_fluct,
                                               const Eigen::VectorXd& ux_gamma) const {
  const FeSpaces& sp = *spaces_;
  const auto& im = sp.interface();
  const auto& sr = segment_rule();
  for (std::size_t e = 0; e + 1 < im.num_nodes(); ++e) {
    double r0 = 0.0, r1 = 0.0;
    for (int q = 0; q < SegmentRule::size; ++q) {
      const double t = sr.t[q];
      const double u = ux_gamma(e) * (1.0 - t) + ux_gamma(e + 1) * t;
      const double val = sp.gamma_weights()[e * 3 + q] * eta_fluct[e * 3 + q] * u;
      r0 += val * (1.0 - t);
      r1 += val * t;
    }
    const int f0 = free_index_[im.fluid_nodes[e]];
    const int f1 = free_index_[im.fluid_nodes[e + 1]];
    if (f0 >= 0) rhs(f0) -= r0;
    if (f1 >= 0) rhs(f1) -= r1;
  }
}

Eigen::VectorXd StokesOperator::dirichlet_on_gamma(const SampleProblem& problem, int component) const {
  const FeSpaces& sp = *spaces_;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sp.n_trace());
  if (!problem.velocity_boundary) return out;
  for (int k = 0; k < sp.n_trace(); ++k) {
    const int v = sp.interface().fluid_nodes[k];
    if (!sp.velocity_fixed()[v]) continue;
    const Point& p = sp.fluid_mesh().vertices[v];
    out(k) = comp(problem.velocity_boundary(p.x, p.y), component);
  }
  return out;
}

Eigen::VectorXd StokesOperator::interface_component(const Eigen::VectorXd& x, const Eigen::VectorXd& dirichlet_gamma,
                                                    int component) const {
  const FeSpaces& sp = *spaces_;
  const int nv = sp.nv_fluid();
  Eigen::VectorXd out(sp.n_trace());
  for (int k = 0; k < sp.n_trace(); ++k) {
    const int f = free_index_[component * nv + sp.interface().fluid_nodes[k]];
    out(k) = f >= 0 ? x(f) : dirichlet_gamma(k);
  }
  return out;
}

std::pair<FieldVector, FieldVector> StokesOperator::expand(const Eigen::VectorXd& x,
                                                           const SampleProblem& problem) const {
  const FeSpaces& sp = *spaces_;
  require(x.size() == num_free(), "StokesOperator::expand: size mismatch");
  const int nv = sp.nv_fluid(), nt = sp.nt_fluid();
  Eigen::VectorXd full = dirichlet_values(problem);
  for (int i = 0; i < num_free(); ++i) full(free_of_[i]) = x(i);
  FieldVector u = sp.zero(FieldKind::velocity);
  FieldVector p = sp.zero(FieldKind::pressure);
  u.values.head(2 * nv) = full.head(2 * nv);
  p.values = full.tail(nv);
  Eigen::Matrix<double, 9, 1> rr, xr;
  Eigen::Vector2d rb;
  for (int t = 0; t < nt; ++t) {
    element_load(t, problem, rr, rb);
    const auto& v = sp.fluid_elements()[t].v;
    for (int k = 0; k < 3; ++k) {
      xr(k) = full(v[k]);
      xr(3 + k) = full(nv + v[k]);
      xr(6 + k) = full(2 * nv + v[k]);
    }
    const Eigen::Vector2d b = bubble_inv_[t] * (rb - bubble_coupling_[t] * xr);
    u.values(2 * nv + t) = b(0);
    u.values(2 * nv + nt + t) = b(1);
  }
  return {std::move(u), std::move(p)};
}

Eigen::VectorXd StokesOperator::restrict_fields(const FieldVector& u, const FieldVector& p) const {
  const int nv = spaces_->nv_fluid();
  Eigen::VectorXd x(num_free());
  for (int i = 0; i < num_free(); ++i) {
    const int d = free_of_[i];
    x(i) = d < 2 * nv ? u.values(d) : p.values(d - 2 * nv);
  }
  return x;
}

// ----------------------------------------------------------------- Darcy

DarcyOperator::DarcyOperator(SpacesPtr spaces, double gamma_p, double g, std::vector<DiagTensor> k_bar)
    : spaces_(std::move(spaces)), gamma_p_(gamma_p), g_(g), k_bar_(std::move(k_bar)) {
  require(gamma_p > 0.0, "assemble_darcy_operator: gamma_p must be positive");
  require(g >= 0.0, "assemble_darcy_operator: g must be nonnegative");
  const FeSpaces& sp = *spaces_;
  require(k_bar_.size() == sp.porous_elements().size(), "assemble_darcy_operator: one tensor per triangle expected");
  for (const auto& k : k_bar_) require(positive(k), "assemble_darcy_operator: K_bar must be positive definite");

  const int nv = sp.nv_porous();
  Triplets trip;
  for (std::size_t t = 0; t < sp.porous_elements().size(); ++t) {
    const auto& el = sp.porous_elements()[t];
    const DiagTensor& k = k_bar_[t];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trip.emplace_back(el.v[a], el.v[b],
                          gamma_p * (k.k11 * el.grad[a].x * el.grad[b].x + k.k22 * el.grad[a].y * el.grad[b].y));
  }
  const auto& im = sp.interface();
  const auto& m = sp.trace_mass();
  for (int col = 0; col < m.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it)
      trip.emplace_back(im.porous_nodes[it.row()], im.porous_nodes[col], g * it.value());
  Eigen::SparseMatrix<double> full(nv, nv);
  full.setFromTriplets(trip.begin(), trip.end());
  full.makeCompressed();

  free_index_.assign(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (!sp.head_fixed()[v]) {
      free_index_[v] = static_cast<int>(free_of_.size());
      free_of_.push_back(v);
    }
  split(full, free_index_, num_free(), system_.matrix, lift_);
  system_.symmetric = true;
  system_.spd = true;
}

Eigen::VectorXd DarcyOperator::dirichlet_values(const SampleProblem& problem) const {
  const FeSpaces& sp = *spaces_;
  Eigen::VectorXd xd = Eigen::VectorXd::Zero(sp.nv_porous());
  if (!problem.head_boundary) return xd;
  for (int v = 0; v < sp.nv_porous(); ++v)
    if (sp.head_fixed()[v]) {
      const Point& p = sp.porous_mesh().vertices[v];
      xd(v) = problem.head_boundary(p.x, p.y);
    }
  return xd;
}

Eigen::VectorXd DarcyOperator::static_rhs(const SampleProblem& problem) const {
  const FeSpaces& sp = *spaces_;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(sp.nv_porous());
  if (problem.darcy_source) {
    const auto& tr = triangle_rule();
    for (const auto& el : sp.porous_elements())
      for (int q = 0; q < TriangleRule::size; ++q) {
        const Vec2 x = at_bary(sp.porous_mesh(), el.v, tr.bary[q]);
        const double f = gamma_p_ * tr.weight[q] * el.area * problem.darcy_source(x.x, x.y);
        for (int k = 0; k < 3; ++k) full(el.v[k]) += f * tr.bary[q][k];
      }
  }
  Eigen::VectorXd rhs(num_free());
  for (int i = 0; i < num_free(); ++i) rhs(i) = full(free_of_[i]);
  rhs -= lift_ * dirichlet_values(problem);
  return rhs;
}

void DarcyOperator::add_trace(Eigen::VectorXd& rhs, const Eigen::VectorXd& delta_p) const {
  const FeSpaces& sp = *spaces_;
  require(delta_p.size() == sp.n_trace(), "add_trace: trace length mismatch");
  const Eigen::VectorXd md = sp.trace_mass() * delta_p;
  for (int k = 0; k < sp.n_trace(); ++k) {
    const int f = free_index_[sp.interface().porous_nodes[k]];
    if (f >= 0) rhs(f) += md(k);
  }
}

void DarcyOperator::add_correction(Eigen::VectorXd& rhs, const std::vector<DiagTensor>& dk,
                                   const Eigen::VectorXd& head) const {
  const FeSpaces& sp = *spaces_;
  require(dk.size() == sp.porous_elements().size(), "add_correction: one tensor per triangle expected");
  for (std::size_t t = 0; t < dk.size(); ++t) {
    const auto& el = sp.porous_elements()[t];
    double gx = 0.0, gy = 0.0;
    for (int a = 0; a < 3; ++a) {
      gx += head(el.v[a]) * el.grad[a].x;
      gy += head(el.v[a]) * el.grad[a].y;
    }
    const double fx = gamma_p_ * dk[t].k11 * gx, fy = gamma_p_ * dk[t].k22 * gy;
    for (int a = 0; a < 3; ++a) {
      const int f = free_index_[el.v[a]];
      if (f >= 0) rhs(f) -= fx * el.grad[a].x + fy * el.grad[a].y;
    }
  }
}

Eigen::VectorXd DarcyOperator::expand(const Eigen::VectorXd& x, const Eigen::VectorXd& dirichlet) const {
  require(x.size() == num_free(), "DarcyOperator::expand: size mismatch");
  Eigen::VectorXd full = dirichlet;
  for (int i = 0; i < num_free(); ++i) full(free_of_[i]) = x(i);
  return full;
}

Eigen::VectorXd DarcyOperator::restrict_field(const Eigen::VectorXd& head) const {
  Eigen::VectorXd x(num_free());
  for (int i = 0; i < num_free(); ++i) x(i) = head(free_of_[i]);
  return x;
}

// --------------------------------------------------------- operation wrappers

StokesOperator assemble_stokes_operator(SpacesPtr spaces, double nu, double gamma_f, std::vector<double> eta_bar) {
  return StokesOperator(std::move(spaces), nu, gamma_f, std::move(eta_bar));
}

DarcyOperator assemble_darcy_operator(SpacesPtr spaces, double gamma_p, const std::vector<DiagTensor>& k_bar_at_points,
                                      double g) {
  auto k = cell_integrals(*spaces, k_bar_at_points);
  return DarcyOperator(std::move(spaces), gamma_p, g, std::move(k));
}

Eigen::VectorXd assemble_stokes_rhs(const StokesOperator& op, const SampleProblem& problem, const FieldVector& delta_f,
                                    const FieldVector& u_prev, const std::vector<double>& eta_j) {
  const FeSpaces& sp = op.spaces();
  require(delta_f.kind == FieldKind::trace && delta_f.values.size() == sp.n_trace(),
          "assemble_stokes_rhs: delta_f must be a trace field");
  require(u_prev.kind == FieldKind::velocity && u_prev.values.size() == sp.size(FieldKind::velocity),
          "assemble_stokes_rhs: u_prev must be a velocity field");
  require(eta_j.size() == op.eta_bar().size(), "assemble_stokes_rhs: eta_j size mismatch");
  Eigen::VectorXd rhs = op.static_rhs(problem);
  op.add_trace(rhs, delta_f.values);
  std::vector<double> fluct(eta_j.size());
  for (std::size_t i = 0; i < eta_j.size(); ++i) fluct[i] = eta_j[i] - op.eta_bar()[i];
  Eigen::VectorXd ux(sp.n_trace());
  for (int k = 0; k < sp.n_trace(); ++k) ux(k) = u_prev.values(sp.interface().fluid_nodes[k]);
  op.add_tangential_correction(rhs, fluct, ux);
  return rhs;
}

Eigen::VectorXd assemble_darcy_rhs(const DarcyOperator& op, const SampleProblem& problem, const FieldVector& delta_p,
                                   const FieldVector& phi_prev, const std::vector<DiagTensor>& k_j_integrals) {
  const FeSpaces& sp = op.spaces();
  require(delta_p.kind == FieldKind::trace && delta_p.values.size() == sp.n_trace(),
          "assemble_darcy_rhs: delta_p must be a trace field");
  require(phi_prev.kind == FieldKind::head && phi_prev.values.size() == sp.nv_porous(),
          "assemble_darcy_rhs: phi_prev must be a head field");
  require(k_j_integrals.size() == op.k_bar().size(), "assemble_darcy_rhs: K_j size mismatch");
  Eigen::VectorXd rhs = op.static_rhs(problem);
  op.add_trace(rhs, delta_p.values);
  std::vector<DiagTensor> dk(k_j_integrals.size());
  for (std::size_t t = 0; t < dk.size(); ++t)
    dk[t] = {k_j_integrals[t].k11 - op.k_bar()[t].k11, k_j_integrals[t].k22 - op.k_bar()[t].k22};
  op.add_correction(rhs, dk, phi_prev.values);
  return rhs;
}

// ---------------------------------------------------------------- traces

FieldVector normal_trace(const FeSpaces& sp, const FieldVector& u) {
  require(u.kind == FieldKind::velocity && u.values.size() == sp.size(FieldKind::velocity),
          "normal_trace: velocity field expected");
  FieldVector t = sp.zero(FieldKind::trace);
  const int nv = sp.nv_fluid();
  for (int k = 1; k + 1 < sp.n_trace(); ++k) t.values(k) = -u.values(nv + sp.interface().fluid_nodes[k]);
  return t;
}

FieldVector head_trace(const FeSpaces& sp, const FieldVector& phi) {
  require(phi.kind == FieldKind::head && phi.values.size() == sp.nv_porous(), "head_trace: head field expected");
  FieldVector t = sp.zero(FieldKind::trace);
  for (int k = 1; k + 1 < sp.n_trace(); ++k) t.values(k) = phi.values(sp.interface().porous_nodes[k]);
  return t;
}

// ------------------------------------------------------------ evaluation

namespace {

struct VelocityAt {
  Vec2 value;
  Jacobian grad;
};

VelocityAt velocity_at(const FeSpaces& sp, const FieldVector& u, std::size_t t, const std::array<double, 3>& b) {
  const auto& el = sp.fluid_elements()[t];
  const int nv = sp.nv_fluid(), nt = sp.nt_fluid();
  VelocityAt r{{0.0, 0.0}, {Vec2{0.0, 0.0}, Vec2{0.0, 0.0}}};
  for (int k = 0; k < 3; ++k) {
    const double ux = u.values(el.v[k]), uy = u.values(nv + el.v[k]);
    r.value.x += ux * b[k];
    r.value.y += uy * b[k];
    r.grad[0].x += ux * el.grad[k].x;
    r.grad[0].y += ux * el.grad[k].y;
    r.grad[1].x += uy * el.grad[k].x;
    r.grad[1].y += uy * el.grad[k].y;
  }
  const double bx = u.values(2 * nv + t), by = u.values(2 * nv + nt + t);
  const double bb = bubble(b);
  const Vec2 gb = bubble_grad(el, b);
  r.value.x += bx * bb;
  r.value.y += by * bb;
  r.grad[0].x += bx * gb.x;
  r.grad[0].y += bx * gb.y;
  r.grad[1].x += by * gb.x;
  r.grad[1].y += by * gb.y;
  return r;
}

const std::vector<ElementGeometry>& scalar_elements(const FeSpaces& sp, FieldKind kind) {
  return kind == FieldKind::head ? sp.porous_elements() : sp.fluid_elements();
}

const TriMesh& scalar_mesh(const FeSpaces& sp, FieldKind kind) {
  return kind == FieldKind::head ? sp.porous_mesh() : sp.fluid_mesh();
}

void check_scalar(const FeSpaces& sp, const FieldVector& s) {
  require((s.kind == FieldKind::pressure || s.kind == FieldKind::head) && s.values.size() == sp.size(s.kind),
          "scalar field of the pressure or head space expected");
}

void check_velocity(const FeSpaces& sp, const FieldVector& u) {
  require(u.kind == FieldKind::velocity && u.values.size() == sp.size(FieldKind::velocity),
          "velocity field expected");
}

ErrorReport finish(double e0, double e1, double n0, double n1) {
  ErrorReport r;
  r.l2_abs = std::sqrt(e0);
  r.h1_abs = std::sqrt(e0 + e1);
  if (n0 > 0.0) r.l2_rel = r.l2_abs / std::sqrt(n0);
  if (n0 + n1 > 0.0) r.h1_rel = r.h1_abs / std::sqrt(n0 + n1);
  return r;
}

}  // namespace

Vec2 eval_velocity(const FeSpaces& sp, const FieldVector& u, std::size_t t, const std::array<double, 3>& bary) {
  check_velocity(sp, u);
  return velocity_at(sp, u, t, bary).value;
}

double eval_scalar(const FeSpaces& sp, const FieldVector& s, std::size_t t, const std::array<double, 3>& bary) {
  check_scalar(sp, s);
  const auto& v = scalar_elements(sp, s.kind)[t].v;
  return s.values(v[0]) * bary[0] + s.values(v[1]) * bary[1] + s.values(v[2]) * bary[2];
}

FieldNorms field_norms(const FeSpaces& sp, const FieldVector& f) {
  const auto& tr = triangle_rule();
  double s0 = 0.0, s1 = 0.0;
  if (f.kind == FieldKind::velocity) {
    check_velocity(sp, f);
    for (std::size_t t = 0; t < sp.fluid_elements().size(); ++t) {
      const double area = sp.fluid_elements()[t].area;
      for (int q = 0; q < TriangleRule::size; ++q) {
        const auto r = velocity_at(sp, f, t, tr.bary[q]);
        const double w = tr.weight[q] * area;
        s0 += w * (r.value.x * r.value.x + r.value.y * r.value.y);
        s1 += w * (r.grad[0].x * r.grad[0].x + r.grad[0].y * r.grad[0].y + r.grad[1].x * r.grad[1].x +
                   r.grad[1].y * r.grad[1].y);
      }
    }
  } else {
    check_scalar(sp, f);
    for (const auto& el : scalar_elements(sp, f.kind)) {
      double gx = 0.0, gy = 0.0;
      for (int k = 0; k < 3; ++k) {
        gx += f.values(el.v[k]) * el.grad[k].x;
        gy += f.values(el.v[k]) * el.grad[k].y;
      }
      s1 += el.area * (gx * gx + gy * gy);
      for (int q = 0; q < TriangleRule::size; ++q) {
        const auto& b = tr.bary[q];
        const double v = f.values(el.v[0]) * b[0] + f.values(el.v[1]) * b[1] + f.values(el.v[2]) * b[2];
        s0 += tr.weight[q] * el.area * v * v;
      }
    }
  }
  return {std::sqrt(s0), std::sqrt(s1), std::sqrt(s0 + s1)};
}

ErrorReport compute_error(const FeSpaces& sp, const FieldVector& u, const VectorField& exact) {
  check_velocity(sp, u);
  const auto& tr = triangle_rule();
  double e0 = 0.0, e1 = 0.0, n0 = 0.0, n1 = 0.0;
  for (std::size_t t = 0; t < sp.fluid_elements().size(); ++t) {
    const auto& el = sp.fluid_elements()[t];
    for (int q = 0; q < TriangleRule::size; ++q) {
      const double w = tr.weight[q] * el.area;
      const Vec2 x = at_bary(sp.fluid_mesh(), el.v, tr.bary[q]);
      const auto r = velocity_at(sp, u, t, tr.bary[q]);
      const Vec2 ev = exact.value(x.x, x.y);
      const Jacobian eg = exact.gradient(x.x, x.y);
      const double dx = ev.x - r.value.x, dy = ev.y - r.value.y;
      e0 += w * (dx * dx + dy * dy);
      n0 += w * (ev.x * ev.x + ev.y * ev.y);
      for (int c = 0; c < 2; ++c) {
        const double gx = eg[c].x - r.grad[c].x, gy = eg[c].y - r.grad[c].y;
        e1 += w * (gx * gx + gy * gy);
        n1 += w * (eg[c].x * eg[c].x + eg[c].y * eg[c].y);
      }
    }
  }
  return finish(e0, e1, n0, n1);
}

ErrorReport compute_error(const FeSpaces& sp, const FieldVector& s, const ScalarField& exact) {
  check_scalar(sp, s);
  const auto& tr = triangle_rule();
  const TriMesh& mesh = scalar_mesh(sp, s.kind);
  double e0 = 0.0, e1 = 0.0, n0 = 0.0, n1 = 0.0;
  for (const auto& el : scalar_elements(sp, s.kind)) {
    double gx = 0.0, gy = 0.0;
    for (int k = 0; k < 3; ++k) {
      gx += s.values(el.v[k]) * el.grad[k].x;
      gy += s.values(el.v[k]) * el.grad[k].y;
    }
    for (int q = 0; q < TriangleRule::size; ++q) {
      const auto& b = tr.bary[q];
      const double w = tr.weight[q] * el.area;
      const Vec2 x = at_bary(mesh, el.v, b);
      const double v = s.values(el.v[0]) * b[0] + s.values(el.v[1]) * b[1] + s.values(el.v[2]) * b[2];
      const double ev = exact.value(x.x, x.y);
      const Vec2 eg = exact.gradient ? exact.gradient(x.x, x.y) : Vec2{gx, gy};
      e0 += w * (ev - v) * (ev - v);
      n0 += w * ev * ev;
      e1 += w * ((eg.x - gx) * (eg.x - gx) + (eg.y - gy) * (eg.y - gy));
      n1 += w * (eg.x * eg.x + eg.y * eg.y);
    }
  }
  return finish(e0, e1, n0, n1);
}

std::vector<double> interface_flux_mismatch(const FeSpaces& sp, const FieldVector& u, const FieldVector& phi,
                                            const TensorFn& k) {
  check_velocity(sp, u);
  require(phi.kind == FieldKind::head && phi.values.size() == sp.nv_porous(), "head field expected");
  const auto& im = sp.interface();
  const auto& sr = segment_rule();
  const int nv = sp.nv_fluid();
  std::vector<double> out;
  out.reserve(sp.gamma_points().size());
  for (std::size_t e = 0; e + 1 < im.num_nodes(); ++e) {
    const auto& el = sp.porous_elements()[im.porous_edge_triangle[e]];
    double dphi_dy = 0.0;
    for (int a = 0; a < 3; ++a) dphi_dy += phi.values(el.v[a]) * el.grad[a].y;
    const double uy0 = u.values(nv + im.fluid_nodes[e]), uy1 = u.values(nv + im.fluid_nodes[e + 1]);
    for (int q = 0; q < SegmentRule::size; ++q) {
      const Vec2& x = sp.gamma_points()[e * 3 + q];
      const double un = -(uy0 * (1.0 - sr.t[q]) + uy1 * sr.t[q]);
      out.push_back(std::abs(un - k(x.x, x.y).k22 * dphi_dy));
    }
  }
  return out;
}

Eigen::SparseMatrix<double> p1_mass(const std::vector<ElementGeometry>& elements, int nv) {
  Triplets t;
  for (const auto& el : elements)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t.emplace_back(el.v[a], el.v[b], el.area * (a == b ? 2.0 : 1.0) / 12.0);
  Eigen::SparseMatrix<double> m(nv, nv);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

FieldVector interpolate_velocity(const FeSpaces& sp, const VectorFn& f) {
  FieldVector u = sp.zero(FieldKind::velocity);
  const int nv = sp.nv_fluid(), nt = sp.nt_fluid();
  for (int v = 0; v < nv; ++v) {
    const Point& p = sp.fluid_mesh().vertices[v];
    const Vec2 val = f(p.x, p.y);
    u.values(v) = val.x;
    u.values(nv + v) = val.y;
  }
  for (int t = 0; t < nt; ++t) {
    const auto& el = sp.fluid_elements()[t];
    const Vec2 c = at_bary(sp.fluid_mesh(), el.v, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    const Vec2 val = f(c.x, c.y);
    double mx = 0.0, my = 0.0;
    for (int k = 0; k < 3; ++k) {
      mx += u.values(el.v[k]) / 3.0;
      my += u.values(nv + el.v[k]) / 3.0;
    }
    u.values(2 * nv + t) = val.x - mx;
    u.values(2 * nv + nt + t) = val.y - my;
  }
  return u;
}

FieldVector interpolate_scalar(const FeSpaces& sp, FieldKind kind, const ScalarFn& f) {
  require(kind == FieldKind::pressure || kind == FieldKind::head, "interpolate_scalar: pressure or head");
  FieldVector s = sp.zero(kind);
  const TriMesh& mesh = scalar_mesh(sp, kind);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) s.values(v) = f(mesh.vertices[v].x, mesh.vertices[v].y);
  return s;
}

}  // namespace edd

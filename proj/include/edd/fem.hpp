#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SparseCore>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "edd/mesh.hpp"

namespace edd {

struct DiagTensor {
  double k11 = 1.0;
  double k22 = 1.0;
};

using ScalarFn = std::function<double(double, double)>;
using VectorFn = std::function<Vec2(double, double)>;
using TensorFn = std::function<DiagTensor(double, double)>;
using Jacobian = std::array<Vec2, 2>;  // row c holds grad of component c

struct ScalarField {
  ScalarFn value;
  VectorFn gradient;
};

struct VectorField {
  VectorFn value;
  std::function<Jacobian(double, double)> gradient;
};

// Data of one realisation. Empty callables mean zero.
struct SampleProblem {
  TensorFn conductivity;
  VectorFn body_force;
  ScalarFn darcy_source;
  ScalarFn mass_source;          // prescribed div u
  ScalarFn tangential_traction;  // s in  -tau.T.n = eta u.tau + s  on y=0
  VectorFn velocity_boundary;
  ScalarFn head_boundary;
};

struct PhysicalParams {
  double nu = 1.0;
  double g = 1.0;
  double alpha = 1.0;
};

enum class FieldKind { velocity, pressure, head, trace };

// velocity layout: [ux per vertex | uy per vertex | bubble x per triangle | bubble y per triangle]
struct FieldVector {
  FieldKind kind = FieldKind::pressure;
  Eigen::VectorXd values;
};

struct ElementGeometry {
  std::array<int, 3> v;
  double area;
  std::array<Vec2, 3> grad;  // gradients of the barycentric coordinates
};

ElementGeometry element_geometry(const TriMesh& mesh, std::size_t t);

class FeSpaces {
 public:
  explicit FeSpaces(CoupledMeshes meshes);

  const CoupledMeshes& meshes() const { return meshes_; }
  const TriMesh& fluid_mesh() const { return meshes_.fluid; }
  const TriMesh& porous_mesh() const { return meshes_.porous; }
  const InterfaceMap& interface() const { return meshes_.interface; }
  double h() const { return meshes_.h_nominal; }

  int nv_fluid() const { return static_cast<int>(meshes_.fluid.num_vertices()); }
  int nt_fluid() const { return static_cast<int>(meshes_.fluid.num_triangles()); }
  int nv_porous() const { return static_cast<int>(meshes_.porous.num_vertices()); }
  int nt_porous() const { return static_cast<int>(meshes_.porous.num_triangles()); }
  int n_trace() const { return static_cast<int>(meshes_.interface.num_nodes()); }
  int n_gamma_points() const { return static_cast<int>(gamma_points_.size()); }

  int size(FieldKind kind) const;
  FieldVector zero(FieldKind kind) const;

  const std::vector<ElementGeometry>& fluid_elements() const { return fluid_el_; }
  const std::vector<ElementGeometry>& porous_elements() const { return porous_el_; }
  const std::vector<char>& velocity_fixed() const { return velocity_fixed_; }
  const std::vector<char>& head_fixed() const { return head_fixed_; }

  // interface quadrature, index e*3+q
  const std::vector<Vec2>& gamma_points() const { return gamma_points_; }
  const std::vector<double>& gamma_weights() const { return gamma_weights_; }
  // P1 mass matrix over the interface nodes
  const Eigen::SparseMatrix<double>& trace_mass() const { return trace_mass_; }
  double trace_norm(const Eigen::VectorXd& t) const;

  // porous cell quadrature points, index t*7+q, with weights area*w
  std::vector<Vec2> porous_points() const;
  std::vector<double> porous_weights() const;

 private:
  CoupledMeshes meshes_;
  std::vector<ElementGeometry> fluid_el_, porous_el_;
  std::vector<char> velocity_fixed_, head_fixed_;
  std::vector<Vec2> gamma_points_;
  std::vector<double> gamma_weights_;
  Eigen::SparseMatrix<double> trace_mass_;
};

using SpacesPtr = std::shared_ptr<const FeSpaces>;
SpacesPtr make_spaces(CoupledMeshes meshes);

struct SparseSystem {
  Eigen::SparseMatrix<double> matrix;  // column major, compressed
  bool symmetric = false;
  bool spd = false;
};

// Integrate a tensor field over each porous triangle: per-triangle (int k11, int k22).
std::vector<DiagTensor> cell_integrals(const FeSpaces& spaces, const TensorFn& k);
// Same, from values sampled at porous_points().
std::vector<DiagTensor> cell_integrals(const FeSpaces& spaces, const std::vector<DiagTensor>& at_points);
// eta = alpha / sqrt(tau.K.tau) at interface quadrature points
std::vector<double> interface_eta(const FeSpaces& spaces, const TensorFn& k, double alpha);

// Local 11x11 MINI matrix, order [ux0..2, uy0..2, p0..2, bx, by].
Eigen::Matrix<double, 11, 11> stokes_element_matrix(const TriMesh& mesh, std::size_t t, double nu);

// Stokes subproblem with bubbles condensed out element by element. The
// unknowns are (ux, uy, p) at vertices, minus Dirichlet velocity nodes.
class StokesOperator {
 public:
  // with_robin = false drops the gamma_f normal term (coupled oracle only)
  StokesOperator(SpacesPtr spaces, double nu, double gamma_f, std::vector<double> eta_bar, bool with_robin = true);

  const SparseSystem& system() const { return system_; }
  const FeSpaces& spaces() const { return *spaces_; }
  int num_free() const { return static_cast<int>(free_of_.size()); }
  const std::vector<int>& free_dofs() const { return free_of_; }  // into (ux | uy | p) vertex blocks
  int free_index(int dof) const { return free_index_[dof]; }
  double gamma_f() const { return gamma_f_; }
  const std::vector<double>& eta_bar() const { return eta_bar_; }

  // (f, v) - <s, v.tau> - (m, q) with condensation, minus Dirichlet lifting
  Eigen::VectorXd static_rhs(const SampleProblem& problem) const;
  // += <delta_f, v.n_f>
  void add_trace(Eigen::VectorXd& rhs, const Eigen::VectorXd& delta_f) const;
  // -= <(eta_j - eta_bar) u.tau, v.tau>, u given by interface x-velocities
  void add_tangential_correction(Eigen::VectorXd& rhs, const std::vector<double>& eta_fluct,
                                 const Eigen::VectorXd& ux_gamma) const;

  // interface values of ux, uy from a free solution plus Dirichlet data
  Eigen::VectorXd interface_component(const Eigen::VectorXd& x, const Eigen::VectorXd& dirichlet_gamma,
                                      int component) const;
  Eigen::VectorXd dirichlet_on_gamma(const SampleProblem& problem, int component) const;

  // full MINI velocity and P1 pressure
  std::pair<FieldVector, FieldVector> expand(const Eigen::VectorXd& x, const SampleProblem& problem) const;
  // free vector of a full field pair (used by oracles)
  Eigen::VectorXd restrict_fields(const FieldVector& u, const FieldVector& p) const;

 private:
  Eigen::VectorXd dirichlet_values(const SampleProblem& problem) const;
  void element_load(std::size_t t, const SampleProblem& problem, Eigen::Matrix<double, 9, 1>& rr,
                    Eigen::Vector2d& rb) const;

  SpacesPtr spaces_;
  double nu_, gamma_f_;
  std::vector<double> eta_bar_;
  std::vector<int> free_index_;  // condensed dof -> free index or -1
  std::vector<int> free_of_;     // free index -> condensed dof
  SparseSystem system_;
  Eigen::SparseMatrix<double> lift_;  // free rows x condensed columns (Dirichlet columns only)
  std::vector<Eigen::Matrix2d> bubble_inv_;
  std::vector<Eigen::Matrix<double, 2, 9>> bubble_coupling_;
};

// Darcy subproblem gamma_p (K grad phi, grad psi) + g <phi, psi>.
class DarcyOperator {
 public:
  // k_bar: per porous triangle integrals of the mean tensor
  DarcyOperator(SpacesPtr spaces, double gamma_p, double g, std::vector<DiagTensor> k_bar);

  const SparseSystem& system() const { return system_; }
  const FeSpaces& spaces() const { return *spaces_; }
  int num_free() const { return static_cast<int>(free_of_.size()); }
  int free_index(int vertex) const { return free_index_[vertex]; }
  double gamma_p() const { return gamma_p_; }
  const std::vector<DiagTensor>& k_bar() const { return k_bar_; }

  // gamma_p (f_p, psi) minus Dirichlet lifting
  Eigen::VectorXd static_rhs(const SampleProblem& problem) const;
  void add_trace(Eigen::VectorXd& rhs, const Eigen::VectorXd& delta_p) const;
  // -= gamma_p ((K_j - K_bar) grad phi, grad psi); dk per triangle integrals
  void add_correction(Eigen::VectorXd& rhs, const std::vector<DiagTensor>& dk, const Eigen::VectorXd& head) const;

  Eigen::VectorXd dirichlet_values(const SampleProblem& problem) const;  // full, zero at free nodes
  Eigen::VectorXd expand(const Eigen::VectorXd& x, const Eigen::VectorXd& dirichlet) const;
  Eigen::VectorXd restrict_field(const Eigen::VectorXd& head) const;

 private:
  SpacesPtr spaces_;
  double gamma_p_, g_;
  std::vector<DiagTensor> k_bar_;
  std::vector<int> free_index_, free_of_;
  SparseSystem system_;
  Eigen::SparseMatrix<double> lift_;
};

// Thin wrappers with the public operation names.
StokesOperator assemble_stokes_operator(SpacesPtr spaces, double nu, double gamma_f, std::vector<double> eta_bar);
DarcyOperator assemble_darcy_operator(SpacesPtr spaces, double gamma_p, const std::vector<DiagTensor>& k_bar_at_points,
                                      double g);
Eigen::VectorXd assemble_stokes_rhs(const StokesOperator& op, const SampleProblem& problem, const FieldVector& delta_f,
                                    const FieldVector& u_prev, const std::vector<double>& eta_j);
Eigen::VectorXd assemble_darcy_rhs(const DarcyOperator& op, const SampleProblem& problem, const FieldVector& delta_p,
                                   const FieldVector& phi_prev, const std::vector<DiagTensor>& k_j_integrals);

// Interface traces in Z_h (endpoints zeroed).
FieldVector normal_trace(const FeSpaces& spaces, const FieldVector& u);
FieldVector head_trace(const FeSpaces& spaces, const FieldVector& phi);

struct FieldNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;
  double h1 = 0.0;
};

struct ErrorReport {
  double l2_abs = 0.0;
  double h1_abs = 0.0;
  std::optional<double> l2_rel;
  std::optional<double> h1_rel;
};

FieldNorms field_norms(const FeSpaces& spaces, const FieldVector& f);
ErrorReport compute_error(const FeSpaces& spaces, const FieldVector& u, const VectorField& exact);
ErrorReport compute_error(const FeSpaces& spaces, const FieldVector& s, const ScalarField& exact);

// Evaluate a discrete field inside triangle t at barycentric point.
Vec2 eval_velocity(const FeSpaces& spaces, const FieldVector& u, std::size_t t, const std::array<double, 3>& bary);
double eval_scalar(const FeSpaces& spaces, const FieldVector& s, std::size_t t, const std::array<double, 3>& bary);

// |u.n_f - K grad(phi).n_p| at interface quadrature points
std::vector<double> interface_flux_mismatch(const FeSpaces& spaces, const FieldVector& u, const FieldVector& phi,
                                            const TensorFn& k);

// Consistent P1 mass matrix of the fluid or porous mesh.
Eigen::SparseMatrix<double> p1_mass(const std::vector<ElementGeometry>& elements, int nv);

// Nodal interpolants.
FieldVector interpolate_velocity(const FeSpaces& spaces, const VectorFn& f);
FieldVector interpolate_scalar(const FeSpaces& spaces, FieldKind kind, const ScalarFn& f);

}  // namespace edd

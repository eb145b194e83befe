#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "edd/ddm.hpp"
#include "edd/fem.hpp"
#include "edd/randfield.hpp"

namespace edd {

struct ManufacturedCase {
  std::string name;
  PhysicalParams phys;
  SampleProblem problem;
  // exact fields; absent when the data do not come from a known solution
  std::optional<VectorField> u;
  std::optional<ScalarField> p;
  std::optional<ScalarField> phi;
  bool has_exact() const { return u && p && phi; }
};

// Exact solution with constant diagonal K. For k11 != k22 the velocity is not
// solenoidal and the case carries a mass source, a Darcy source and a BJS datum.
ManufacturedCase test1_case(double k11, double k22, const PhysicalParams& phys = {});

// Literal forcing and Dirichlet formulas of the random-field experiment.
ManufacturedCase test2_case(const ConductivitySample& sample, const PhysicalParams& phys = {});

struct ResidualReport {
  double momentum = 0.0;        // |-div T - f|
  double mass = 0.0;            // |div u - m|
  double darcy = 0.0;           // |-div(K grad phi) - f_p|
  double interface_mass = 0.0;  // |u.n_f - K grad phi.n_p|
  double normal_stress = 0.0;   // |-n.T.n - g phi|
  double bjs = 0.0;             // |-tau.T.n - eta u.tau - s|
  double gradients = 0.0;       // analytic gradients vs central differences
  double boundary = 0.0;        // Dirichlet data vs exact fields
  double max() const;
};

// Central differences of the exact fields (and of the fluxes built from their
// analytic gradients) at random points. Requires case.has_exact().
ResidualReport strong_residual_check(const ManufacturedCase& c, int n_points, double fd_step, std::uint64_t seed = 7);

// One sparse LU solve of the coupled Stokes-Darcy system with per-sample coefficients.
SolutionFields monolithic_coupled_solve(SpacesPtr spaces, const SampleProblem& problem, const PhysicalParams& phys);

}  // namespace edd

#include "edd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "edd/errors.hpp"
#include "edd/linalg.hpp"

namespace edd {

namespace {

constexpr double kPi = M_PI;

ScalarField test_head() {
  return {[](double x, double y) { return (std::exp(y) - std::exp(-y)) * std::sin(x); },
          [](double x, double y) {
            return Vec2{(std::exp(y) - std::exp(-y)) * std::cos(x), (std::exp(y) + std::exp(-y)) * std::sin(x)};
          }};
}

}  // namespace

double ResidualReport::max() const {
  return std::max({momentum, mass, darcy, interface_mass, normal_stress, bjs, gradients, boundary});
}

ManufacturedCase test1_case(double k11, double k22, const PhysicalParams& phys) {
  require(k11 > 0.0 && k22 > 0.0, "test1_case: conductivities must be positive");
  const double nu = phys.nu;
  ManufacturedCase c;
  c.name = "test1(" + std::to_string(k11) + "," + std::to_string(k22) + ")";
  c.phys = phys;

  c.u = VectorField{
      [=](double x, double y) {
        const double s = std::sin(kPi * y);
        return Vec2{k11 / kPi * std::sin(2 * kPi * y) * std::cos(x),
                    (-2.0 * k22 + k22 / (kPi * kPi) * s * s) * std::sin(x)};
      },
      [=](double x, double y) {
        const double s = std::sin(kPi * y);
        return Jacobian{Vec2{-k11 / kPi * std::sin(2 * kPi * y) * std::sin(x),
                             2.0 * k11 * std::cos(2 * kPi * y) * std::cos(x)},
                        Vec2{(-2.0 * k22 + k22 / (kPi * kPi) * s * s) * std::cos(x),
                             k22 / kPi * std::sin(2 * kPi * y) * std::sin(x)}};
      }};
  c.p = ScalarField{[](double, double) { return 0.0; }, [](double, double) { return Vec2{0.0, 0.0}; }};
  c.phi = test_head();

  // -div T = -nu (lap u + grad div u),  div u = q sin(2 pi y) sin x
  const double q = (k22 - k11) / kPi;
  const auto head = c.phi->value;
  c.problem.conductivity = [=](double, double) { return DiagTensor{k11, k22}; };
  c.problem.body_force = [=](double x, double y) {
    const double s = std::sin(kPi * y), s2 = std::sin(2 * kPi * y), c2 = std::cos(2 * kPi * y);
    const double f1 = nu * (1.0 + 4.0 * kPi * kPi) * k11 / kPi * s2 * std::cos(x) - nu * q * s2 * std::cos(x);
    const double f2 = -nu * (2.0 * k22 - k22 / (kPi * kPi) * s * s) * std::sin(x) -
                      2.0 * nu * k22 * c2 * std::sin(x) - 2.0 * kPi * nu * q * c2 * std::sin(x);
    return Vec2{f1, f2};
  };
  if (k11 != k22) {
    c.problem.mass_source = [=](double x, double y) { return q * std::sin(2 * kPi * y) * std::sin(x); };
    c.problem.darcy_source = [=](double x, double y) { return (k11 - k22) * head(x, y); };
    c.problem.tangential_traction = [=](double x, double) { return 2.0 * nu * (k11 - k22) * std::cos(x); };
  }
  c.problem.velocity_boundary = c.u->value;
  c.problem.head_boundary = head;
  return c;
}

ManufacturedCase test2_case(const ConductivitySample& sample, const PhysicalParams& phys) {
  const double nu = phys.nu;
  ManufacturedCase c;
  c.name = "test2(sample " + std::to_string(sample.index()) + ")";
  c.phys = phys;
  const ScalarField head = test_head();
  c.problem.conductivity = sample.as_function();
  c.problem.darcy_source = head.value;
  c.problem.body_force = [=](double x, double y) {
    const DiagTensor k = sample(x, y);
    const double s = std::sin(kPi * y);
    const double f1 = (1.0 + nu + 4.0 * nu * kPi * kPi) * k.k11 / kPi * std::sin(2 * kPi * y) * std::cos(x);
    const double f2 = -2.0 * nu * k.k22 * std::cos(2 * kPi * y) * std::sin(x) +
                      (1.0 + nu) * (-2.0 * k.k22 + k.k22 / (kPi * kPi) * s * s) * std::sin(x);
    return Vec2{f1, f2};
  };
  c.problem.velocity_boundary = [=](double x, double y) {
    const DiagTensor k = sample(x, y);
    const double s = std::sin(kPi * y);
    return Vec2{k.k11 / kPi * std::sin(2 * kPi * y) * std::cos(x),
                (-2.0 * k.k22 + k.k22 / (kPi * kPi) * s * s) * std::sin(x)};
  };
  c.problem.head_boundary = head.value;
  return c;
}

ResidualReport strong_residual_check(const ManufacturedCase& c, int n_points, double h, std::uint64_t seed) {
  require(c.has_exact(), "strong_residual_check: case has no exact solution");
  require(n_points > 0 && h > 0.0, "strong_residual_check: bad sampling parameters");
  const auto& u = *c.u;
  const auto& p = *c.p;
  const auto& phi = *c.phi;
  const auto& pr = c.problem;
  const double nu = c.phys.nu, g = c.phys.g, alpha = c.phys.alpha;
  auto zero_if_empty = [](const ScalarFn& f, double x, double y) { return f ? f(x, y) : 0.0; };

  // stress from analytic gradients; rows of T
  auto stress = [&](double x, double y) {
    const Jacobian gu = u.gradient(x, y);
    const double pp = p.value(x, y);
    const double t11 = -pp + 2.0 * nu * gu[0].x;
    const double t22 = -pp + 2.0 * nu * gu[1].y;
    const double t12 = nu * (gu[0].y + gu[1].x);
    return std::array<double, 3>{t11, t12, t22};
  };

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ux(0.05, kPi - 0.05), uy(0.05, 0.95);
  ResidualReport r;
  for (int i = 0; i < n_points; ++i) {
    // fluid interior
    double x = ux(gen), y = uy(gen);
    const auto txp = stress(x + h, y), txm = stress(x - h, y), typ = stress(x, y + h), tym = stress(x, y - h);
    const double div_t1 = (txp[0] - txm[0]) / (2 * h) + (typ[1] - tym[1]) / (2 * h);
    const double div_t2 = (txp[1] - txm[1]) / (2 * h) + (typ[2] - tym[2]) / (2 * h);
    const Vec2 f = pr.body_force ? pr.body_force(x, y) : Vec2{};
    r.momentum = std::max({r.momentum, std::abs(-div_t1 - f.x), std::abs(-div_t2 - f.y)});
    const Jacobian gu = u.gradient(x, y);
    r.mass = std::max(r.mass, std::abs(gu[0].x + gu[1].y - zero_if_empty(pr.mass_source, x, y)));
    const Vec2 dxu{(u.value(x + h, y).x - u.value(x - h, y).x) / (2 * h),
                   (u.value(x, y + h).x - u.value(x, y - h).x) / (2 * h)};
    const Vec2 dyu{(u.value(x + h, y).y - u.value(x - h, y).y) / (2 * h),
                   (u.value(x, y + h).y - u.value(x, y - h).y) / (2 * h)};
    r.gradients = std::max({r.gradients, std::abs(dxu.x - gu[0].x), std::abs(dxu.y - gu[0].y),
                            std::abs(dyu.x - gu[1].x), std::abs(dyu.y - gu[1].y)});

    // porous interior
    y = -uy(gen);
    auto flux = [&](double xx, double yy) {
      const Vec2 gp = phi.gradient(xx, yy);
      const DiagTensor k = pr.conductivity(xx, yy);
      return Vec2{k.k11 * gp.x, k.k22 * gp.y};
    };
    const double div_flux = (flux(x + h, y).x - flux(x - h, y).x) / (2 * h) + (flux(x, y + h).y - flux(x, y - h).y) / (2 * h);
    r.darcy = std::max(r.darcy, std::abs(-div_flux - zero_if_empty(pr.darcy_source, x, y)));
    const Vec2 gp = phi.gradient(x, y);
    r.gradients = std::max({r.gradients, std::abs((phi.value(x + h, y) - phi.value(x - h, y)) / (2 * h) - gp.x),
                            std::abs((phi.value(x, y + h) - phi.value(x, y - h)) / (2 * h) - gp.y)});

    // interface, n_f = (0,-1), tau = (1,0)
    const auto t = stress(x, 0.0);
    const Vec2 uv = u.value(x, 0.0);
    const double un = -uv.y;
    r.interface_mass = std::max(r.interface_mass, std::abs(un - pr.conductivity(x, 0.0).k22 * phi.gradient(x, 0.0).y));
    r.normal_stress = std::max(r.normal_stress, std::abs(-t[2] - g * phi.value(x, 0.0)));
    const double eta = alpha / std::sqrt(pr.conductivity(x, 0.0).k11);
    const double s = pr.tangential_traction ? pr.tangential_traction(x, 0.0) : 0.0;
    r.bjs = std::max(r.bjs, std::abs(t[1] - eta * uv.x - s));  // -tau.T.n_f = T12

    // Dirichlet data
    const Vec2 ub = pr.velocity_boundary(x, 1.0), ue = u.value(x, 1.0);
    r.boundary = std::max({r.boundary, std::abs(ub.x - ue.x), std::abs(ub.y - ue.y),
                           std::abs(pr.head_boundary(x, -1.0) - phi.value(x, -1.0))});
  }
  return r;
}

SolutionFields monolithic_coupled_solve(SpacesPtr spaces, const SampleProblem& problem, const PhysicalParams& phys) {
  require(static_cast<bool>(problem.conductivity), "monolithic_coupled_solve: sample without K");
  const FeSpaces& sp = *spaces;
  const double g = phys.g;
  StokesOperator st(spaces, phys.nu, 0.0, interface_eta(sp, problem.conductivity, phys.alpha), false);
  // g (K grad phi, grad psi) and no interface mass
  DarcyOperator da(spaces, g, 0.0, cell_integrals(sp, problem.conductivity));

  const int ns = st.num_free(), nd = da.num_free(), nv = sp.nv_fluid();
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < st.system().matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(st.system().matrix, col); it; ++it)
      trip.emplace_back(it.row(), col, it.value());
  for (int col = 0; col < da.system().matrix.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(da.system().matrix, col); it; ++it)
      trip.emplace_back(ns + it.row(), ns + col, it.value());

  Eigen::VectorXd rhs(ns + nd);
  rhs.head(ns) = st.static_rhs(problem);
  rhs.tail(nd) = da.static_rhs(problem);
  const Eigen::VectorXd uy_d = st.dirichlet_on_gamma(problem, 1);
  const Eigen::VectorXd head_d = da.dirichlet_values(problem);
  const auto& im = sp.interface();
  const auto& m = sp.trace_mass();
  for (int col = 0; col < m.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it) {
      const int k = static_cast<int>(it.row()), l = col;
      // Stokes row (uy at fluid node k), head column (porous node l): g <phi, v.n_f> = -g int phi v_y
      const int sr = st.free_index(nv + im.fluid_nodes[k]);
      const int dc = da.free_index(im.porous_nodes[l]);
      if (sr >= 0) {
        if (dc >= 0)
          trip.emplace_back(sr, ns + dc, -g * it.value());
        else
          rhs(sr) += g * it.value() * head_d(im.porous_nodes[l]);
      }
      // Darcy row (porous node k), uy column (fluid node l): -g <u.n_f, psi> = +g int u_y psi
      const int dr = da.free_index(im.porous_nodes[k]);
      const int sc = st.free_index(nv + im.fluid_nodes[l]);
      if (dr >= 0) {
        if (sc >= 0)
          trip.emplace_back(ns + dr, sc, g * it.value());
        else
          rhs(ns + dr) -= g * it.value() * uy_d(l);
      }
    }
  SparseSystem sys;
  sys.matrix.resize(ns + nd, ns + nd);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());
  sys.matrix.makeCompressed();
  const Factorization f = Factorization::factorize(sys);
  const Eigen::VectorXd x = f.solve(rhs);
  auto [u, p] = st.expand(x.head(ns), problem);
  return {std::move(u), std::move(p), FieldVector{FieldKind::head, da.expand(x.tail(nd), head_d)}};
}

}  // namespace edd

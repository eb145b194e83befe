#include <doctest.h>

#include <cmath>
#include <numbers>

#include "edd/errors.hpp"
#include "edd/oracle.hpp"

using namespace edd;

namespace {

constexpr double pi = std::numbers::pi;

// -nu (lap u + grad div u) + grad p from second differences of u alone
Vec2 fd_momentum(const VectorField& u, double nu, double x, double y, double h) {
  auto U = [&](double a, double b) { return u.value(a, b); };
  const Vec2 c = U(x, y), xp = U(x + h, y), xm = U(x - h, y), yp = U(x, y + h), ym = U(x, y - h);
  const Vec2 pp = U(x + h, y + h), pm = U(x + h, y - h), mp = U(x - h, y + h), mm = U(x - h, y - h);
  const double h2 = h * h;
  const double lap1 = (xp.x + xm.x + yp.x + ym.x - 4 * c.x) / h2;
  const double lap2 = (xp.y + xm.y + yp.y + ym.y - 4 * c.y) / h2;
  const double u1xx = (xp.x - 2 * c.x + xm.x) / h2, u2yy = (yp.y - 2 * c.y + ym.y) / h2;
  const double u1xy = (pp.x - pm.x - mp.x + mm.x) / (4 * h2), u2xy = (pp.y - pm.y - mp.y + mm.y) / (4 * h2);
  // p = 0 for these cases
  return {-nu * (lap1 + u1xx + u2xy), -nu * (lap2 + u1xy + u2yy)};
}

}  // namespace

TEST_CASE("test 1 cases pass the strong residual gate") {
  for (auto [k11, k22] : {std::pair{2.21, 2.21}, {4.11, 4.11}, {6.21, 6.21}, {2.11, 3.11}, {4.11, 5.21}, {6.21, 1.21}}) {
    auto c = test1_case(k11, k22);
    REQUIRE(c.has_exact());
    auto r = strong_residual_check(c, 100, 1e-5);
    CAPTURE(c.name);
    CHECK(r.momentum < 1e-6 * (1 + k11 + k22) * 10);
    CHECK(r.mass < 1e-10);
    CHECK(r.darcy < 1e-6);
    CHECK(r.interface_mass < 1e-10);
    CHECK(r.normal_stress < 1e-10);
    CHECK(r.bjs < 1e-10);
    CHECK(r.gradients < 1e-6);
    CHECK(r.boundary < 1e-12);
  }
}

TEST_CASE("forcing agrees with an independent difference stencil") {
  for (auto [k11, k22] : {std::pair{2.21, 2.21}, {2.11, 3.11}}) {
    auto c = test1_case(k11, k22);
    for (double x : {0.3, 1.1, 2.7})
      for (double y : {0.15, 0.5, 0.83}) {
        const Vec2 f = c.problem.body_force(x, y), fd = fd_momentum(*c.u, 1.0, x, y, 1e-3);
        CHECK(f.x == doctest::Approx(fd.x).epsilon(1e-4).scale(1.0));
        CHECK(f.y == doctest::Approx(fd.y).epsilon(1e-4).scale(1.0));
      }
  }
}

TEST_CASE("head is harmonic and matches the interface flux") {
  auto c = test1_case(3.0, 3.0);
  for (double x : {0.2, 1.5, 3.0}) {
    // u.n_f = -u2(x,0) = 2 k sin x = k dphi/dy at y = 0
    const double un = -c.u->value(x, 0.0).y;
    CHECK(un == doctest::Approx(2 * 3.0 * std::sin(x)));
    CHECK(un == doctest::Approx(3.0 * c.phi->gradient(x, 0.0).y));
    CHECK(c.phi->value(x, 0.0) == 0.0);
  }
}

TEST_CASE("an injected defect is detected") {
  auto c = test1_case(2.21, 2.21);
  auto f = c.problem.body_force;
  c.problem.body_force = [f](double x, double y) {
    Vec2 v = f(x, y);
    v.x += 1.0;
    return v;
  };
  auto r = strong_residual_check(c, 50, 1e-5);
  CHECK(r.momentum == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("test 2 formulas") {
  RandomFieldParams p;
  p.sigma = 0.0;
  auto c = test2_case(sample_conductivity(p, {1, 0, 0}));
  for (double x : {0.4, 2.0})
    for (double y : {0.1, 0.6}) {
      const double f1 = (2 + 4 * pi * pi) / pi * std::sin(2 * pi * y) * std::cos(x);
      CHECK(c.problem.body_force(x, y).x == doctest::Approx(f1).epsilon(1e-14));
      CHECK(c.problem.darcy_source(x, 0.0) == 0.0);
    }
  CHECK_FALSE(c.has_exact());

  // ten points against a long double re-implementation, random sample, nu = 0.7
  RandomFieldParams q;
  auto s = sample_conductivity(q, {7, 0, 3});
  PhysicalParams phys;
  phys.nu = 0.7;
  auto d = test2_case(s, phys);
  const long double PI = std::numbers::pi_v<long double>, nu = 0.7L;
  for (int i = 0; i < 10; ++i) {
    const long double x = 0.3L * i + 0.05L, y = 0.09L * i + 0.02L;
    const long double k11 = s(static_cast<double>(x), static_cast<double>(y)).k11;
    const long double k22 = s(static_cast<double>(x), static_cast<double>(y)).k22;
    const long double sn = std::sin(PI * y);
    const long double f1 = (1 + nu + 4 * nu * PI * PI) * k11 / PI * std::sin(2 * PI * y) * std::cos(x);
    const long double f2 = -2 * nu * k22 * std::cos(2 * PI * y) * std::sin(x) +
                           (1 + nu) * (-2 * k22 + k22 / (PI * PI) * sn * sn) * std::sin(x);
    const long double fp = (std::exp(-y) - std::exp(y)) * std::sin(x);
    const Vec2 f = d.problem.body_force(static_cast<double>(x), static_cast<double>(y));
    CHECK(f.x == doctest::Approx(static_cast<double>(f1)).epsilon(1e-13));
    CHECK(f.y == doctest::Approx(static_cast<double>(f2)).epsilon(1e-13));
    CHECK(d.problem.darcy_source(static_cast<double>(x), static_cast<double>(-y)) ==
          doctest::Approx(static_cast<double>(fp)).epsilon(1e-13));
  }
}

TEST_CASE("monolithic solve") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 16));
  SUBCASE("zero data") {
    SampleProblem z;
    z.conductivity = [](double, double) { return DiagTensor{2.0, 2.0}; };
    auto s = monolithic_coupled_solve(sp, z, {});
    CHECK(s.velocity.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.pressure.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.head.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("agrees with the converged DDM") {
    auto c = test1_case(2.21, 2.21);
    auto m = monolithic_coupled_solve(sp, c.problem, c.phys);
    DdmConfig cfg;
    cfg.tol = 1e-11;
    cfg.max_iter = 400;
    auto d = ensemble_ddm_solve(sp, std::vector<SampleProblem>{c.problem}, cfg);
    REQUIRE(d.history.converged);
    const double em = *compute_error(*sp, m.velocity, *c.u).l2_rel, ed = *compute_error(*sp, d.solutions[0].velocity, *c.u).l2_rel;
    CHECK(em == doctest::Approx(ed).epsilon(1e-3));
    CHECK(em < 0.02);
    const double hm = *compute_error(*sp, m.head, *c.phi).h1_rel;
    CHECK(hm < 0.1);
  }
  CHECK_THROWS_AS(monolithic_coupled_solve(sp, SampleProblem{}, {}), InputError);
}

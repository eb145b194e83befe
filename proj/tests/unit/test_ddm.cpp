#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "edd/ddm.hpp"
#include "edd/errors.hpp"
#include "edd/linalg.hpp"
#include "edd/oracle.hpp"

using namespace edd;

namespace {

constexpr double pi = std::numbers::pi;

// the closed formula in long double
std::pair<long double, long double> optimal_ld(long double mu, long double det, long double len, long double h) {
  const long double pi_l = std::numbers::pi_v<long double>;
  const long double smin = pi_l / len, smax = pi_l / h;
  const long double t = (1.0L - 2.0L * mu * det * smin * smax) / (det * (smin + smax));
  const long double r = std::sqrt(t * t + 2.0L * mu / det);
  return {t + r, -t + r};
}

std::vector<SampleProblem> test1_samples(std::initializer_list<double> ks) {
  std::vector<SampleProblem> v;
  for (double k : ks) v.push_back(test1_case(k, k).problem);
  return v;
}

double h1_diff(const FeSpaces& sp, const SolutionFields& a, const SolutionFields& b) {
  FieldVector du{FieldKind::velocity, a.velocity.values - b.velocity.values};
  FieldVector dh{FieldKind::head, a.head.values - b.head.values};
  return field_norms(sp, du).h1 + field_norms(sp, dh).h1;
}

}  // namespace

TEST_CASE("update coefficients") {
  auto c = update_coefficients(0.7, 0.7);
  CHECK(c.a == 1.0);
  CHECK(c.b == -2.0);
  CHECK(c.c == -1.0);
  CHECK(c.d == doctest::Approx(1.4));
  auto e = update_coefficients(1.0, 2.0);
  CHECK(e.a == 0.5);
  CHECK(e.b == -1.5);
  CHECK(e.c == -1.0);
  CHECK(e.d == 3.0);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 50; ++i) {
    const double gf = u(gen), gp = u(gen);
    auto k = update_coefficients(gf, gp);
    CHECK(k.a * gp == doctest::Approx(gf).epsilon(1e-14));
    CHECK(k.d == gf + gp);
  }
  CHECK_THROWS_AS(update_coefficients(0.0, 1.0), InputError);
  CHECK_THROWS_AS(update_coefficients(1.0, -1.0), InputError);
}

TEST_CASE("trace update arithmetic") {
  const auto k = update_coefficients(1.0, 1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  auto t0 = trace_update(z, z, z, z, k, 1.0);
  CHECK(t0.delta_f.norm() == 0.0);
  CHECK(t0.delta_p.norm() == 0.0);
  Eigen::VectorXd two = Eigen::VectorXd::Constant(4, 2.0), one = Eigen::VectorXd::Ones(4);
  auto t1 = trace_update(z, two, z, one, k, 1.0);
  CHECK(t1.delta_f.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(trace_update(z, Eigen::VectorXd::Zero(3), z, z, k, 1.0), InputError);
}

TEST_CASE("compatibility traces are invariant under the update") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int i = 0; i < 20; ++i) {
    const double gf = u(gen), gp = u(gen), g = u(gen);
    Eigen::VectorXd un = Eigen::VectorXd::Random(7), ph = Eigen::VectorXd::Random(7);
    const Eigen::VectorXd df = gf * un - g * ph, dp = gp * un + g * ph;
    auto t = trace_update(df, dp, un, ph, update_coefficients(gf, gp), g);
    CHECK((t.delta_f - df).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((t.delta_p - dp).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("optimal robin parameters") {
  // symmetric case: s_min = s_max = 1 means L' = h = pi
  auto s = optimal_robin_parameters(0.5, 1.0, pi, pi);
  CHECK(s.gamma_f == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.gamma_p == doctest::Approx(1.0).epsilon(1e-15));

  const double kbar = (2.21 + 4.11 + 6.21) / 3.0;
  auto g = optimal_robin_parameters(1.0, kbar * kbar, pi, 1.0 / 32);
  auto [gf, gp] = optimal_ld(1.0L, static_cast<long double>(kbar) * kbar, std::numbers::pi_v<long double>, 1.0L / 32);
  CHECK(g.gamma_f == doctest::Approx(static_cast<double>(gf)).epsilon(1e-12));
  CHECK(g.gamma_p == doctest::Approx(static_cast<double>(gp)).epsilon(1e-12));
  // golden values for regression
  CHECK(g.gamma_f == doctest::Approx(0.028749).epsilon(1e-4));
  CHECK(g.gamma_p == doctest::Approx(3.98833).epsilon(1e-4));
  CHECK(g.gamma_f < g.gamma_p);

  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> lu(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double mu = std::exp(lu(gen)), det = std::exp(lu(gen)), len = std::exp(lu(gen)), h = std::exp(lu(gen));
    auto r = optimal_robin_parameters(mu, det, len, h);
    CHECK(r.gamma_f > 0.0);
    CHECK(r.gamma_p > 0.0);
    CHECK(std::abs(r.gamma_f * r.gamma_p - 2 * mu / det) <= 1e-12 * (2 * mu / det));
  }
  CHECK_THROWS_AS(optimal_robin_parameters(0.0, 1.0, 1.0, 1.0), InputError);
  CHECK_THROWS_AS(optimal_robin_parameters(1.0, 1.0, 1.0, -1.0), InputError);
}

TEST_CASE("ensemble solve on test 1") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 16));
  auto samples = test1_samples({2.21, 4.11, 6.21});
  DdmConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 400;
  auto r = ensemble_ddm_solve(sp, samples, cfg);
  REQUIRE(r.history.converged);
  CHECK(r.history.factorizations == 2);
  CHECK(r.history.compatibility_residual < 10 * cfg.tol);
  CHECK(r.solutions.size() == 3);
  for (int j : r.history.sample_iterations) CHECK(j > 0);
  REQUIRE(r.stats.has_value());
  CHECK(r.stats->rho_max_all == doctest::Approx(6.21 - (2.21 + 4.11 + 6.21) / 3).epsilon(1e-12));

  SUBCASE("matches the monolithic oracle") {
    for (std::size_t j = 0; j < samples.size(); ++j) {
      auto m = monolithic_coupled_solve(sp, samples[j], cfg.phys);
      CHECK(h1_diff(*sp, r.solutions[j], m) < 1e-6);
    }
  }

  SUBCASE("agrees with per-sample solves") {
    auto b = traditional_ddm_batch(sp, samples, cfg);
    CHECK(b.factorizations == 6);
    for (std::size_t j = 0; j < samples.size(); ++j) {
      CHECK(b.histories[j].converged);
      CHECK(h1_diff(*sp, r.solutions[j], b.solutions[j]) < 1e-6);
    }
  }

  SUBCASE("sink receives every solution") {
    int got = 0;
    SolveOptions opt;
    opt.sink = [&](int, SolutionFields&& s) {
      ++got;
      CHECK(s.velocity.values.size() == sp->size(FieldKind::velocity));
    };
    auto rs = ensemble_ddm_solve(sp, samples, cfg, opt);
    CHECK(got == 3);
    CHECK(rs.solutions.empty());
    CHECK(rs.history.increments == r.history.increments);
  }
}

TEST_CASE("single-member ensemble equals the traditional solve") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 8));
  auto s = test1_samples({3.0});
  DdmConfig cfg;
  auto a = ensemble_ddm_solve(sp, s, cfg);
  auto b = traditional_ddm_solve(sp, s[0], cfg);
  CHECK(a.history.increments == b.history.increments);
  CHECK((a.solutions[0].velocity.values - b.solutions[0].velocity.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fixed point invariance") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 16));
  auto s = test1_samples({4.11});
  DdmConfig cfg;
  cfg.mode = RobinMode::fixed;
  cfg.gamma_f = 0.3;
  cfg.gamma_p = 2.0;
  cfg.max_iter = 1;
  cfg.tol = 1e-14;
  auto m = monolithic_coupled_solve(sp, s[0], cfg.phys);
  const Eigen::VectorXd un = normal_trace(*sp, m.velocity).values, ph = head_trace(*sp, m.head).values;
  SolveOptions opt;
  opt.initial_traces = {{cfg.gamma_f * un - ph, cfg.gamma_p * un + ph}};
  auto r = ensemble_ddm_solve(sp, s, cfg, opt);
  CHECK(r.history.increments.at(0).at(0) < 1e-8);
  CHECK(h1_diff(*sp, r.solutions[0], m) < 1e-8);
}

TEST_CASE("final errors do not depend on the robin pair") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 16));
  auto c = test1_case(2.21, 2.21);
  std::vector<SampleProblem> s{c.problem};
  std::vector<double> errs;
  for (RobinPair g : {RobinPair{0.0, 0.0}, RobinPair{0.1, 10.0}, RobinPair{0.1, 0.1}}) {
    DdmConfig cfg;
    cfg.tol = 1e-10;
    cfg.max_iter = 500;
    if (g.gamma_f > 0.0) {
      cfg.mode = RobinMode::fixed;
      cfg.gamma_f = g.gamma_f;
      cfg.gamma_p = g.gamma_p;
    }
    auto r = ensemble_ddm_solve(sp, s, cfg);
    REQUIRE(r.history.converged);
    errs.push_back(*compute_error(*sp, r.solutions[0].velocity, *c.u).h1_rel);
  }
  for (double e : errs) CHECK(e == doctest::Approx(errs[0]).epsilon(0.01));
}

TEST_CASE("non-convergence is flagged") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 8));
  DdmConfig cfg;
  cfg.max_iter = 2;
  auto r = ensemble_ddm_solve(sp, test1_samples({2.0, 5.0}), cfg);
  CHECK_FALSE(r.history.converged);
  CHECK(r.history.iterations == 2);
  CHECK(r.history.increments.size() == 2);
  CHECK(r.solutions.size() == 2);
  CHECK_THROWS_AS(ensemble_ddm_solve(sp, std::vector<SampleProblem>{}, cfg), InputError);
}

TEST_CASE("contraction diagnostics") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 8));
  std::vector<ConductivitySample> one{constant_sample(2.0, 2.0)};
  auto st = ensemble_stats(std::span<const ConductivitySample>(one), 1.0, dense_y_grid(10), sp->gamma_points());
  IterationHistory h;
  h.increments = {{1.0}, {0.5}, {0.25}, {0.125}, {0.0625}, {0.03125}, {0.015625}};
  DdmConfig cfg;

  h.gamma = {0.5, 2.0};
  auto r = contraction_diagnostics(h, st, cfg, 1.0 / 8);
  REQUIRE(r.e.has_value());
  CHECK(*r.e < 1.0);
  const double q = 0.25;
  CHECK(*r.e == doctest::Approx(std::max(2 * q * q / (1 + q * q), (1 + q * q) / 2)));
  REQUIRE(r.observed_ratio.has_value());
  CHECK(*r.observed_ratio == doctest::Approx(0.5));
  CHECK_FALSE(r.e_h.has_value());

  h.gamma = {1.0, 1.0};
  auto e1 = contraction_diagnostics(h, st, cfg, 1.0 / 8);
  REQUIRE(e1.e.has_value());
  CHECK(*e1.e == doctest::Approx(1.0));
  CHECK(e1.e_h.has_value());
}

TEST_CASE("history csv") {
  IterationHistory h;
  h.increments = {{0.5, 0.25}};
  h.wall_ms_darcy = {1.0};
  h.wall_ms_stokes = {2.0};
  std::ostringstream os;
  write_history_csv(os, h);
  CHECK(os.str() == "iter,sample,trace_increment,wall_ms_darcy,wall_ms_stokes\n1,0,0.5,1,2\n1,1,0.25,1,2\n");
}

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "edd/errors.hpp"
#include "edd/oracle.hpp"
#include "edd/uq.hpp"

using namespace edd;

namespace {

double max_diff(const MeanFields& a, const MeanFields& b) {
  return std::max({(a.velocity.values - b.velocity.values).cwiseAbs().maxCoeff(),
                   (a.pressure.values - b.pressure.values).cwiseAbs().maxCoeff(),
                   (a.head.values - b.head.values).cwiseAbs().maxCoeff()});
}

double max_norm(const ErrorSummary& e) { return std::max({e.u_l2, e.u_h1, e.p_l2, e.phi_l2, e.phi_h1}); }

UqModel model_with(double tol) {
  UqModel m = default_uq_model();
  m.ddm.tol = tol;
  m.ddm.diagnostics = false;
  return m;
}

}  // namespace

TEST_CASE("one-sample mean is that sample") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 8));
  auto m = model_with(1e-10);
  auto r = mc_estimate(sp, 1, m, {5, 0, 0});
  auto sample = sample_conductivity(m.field, {5, 0, 0});
  auto s = ensemble_ddm_solve(sp, std::vector<SampleProblem>{m.make_problem(sample)}, m.ddm);
  MeanFields one{p1_part(*sp, s.solutions[0].velocity), s.solutions[0].pressure, s.solutions[0].head};
  CHECK(max_diff(r.mean, one) < 1e-12);
  CHECK(r.levels.size() == 1);
  CHECK(r.converged);
}

TEST_CASE("zero variance gives the deterministic solution") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 8));
  auto m = model_with(1e-11);
  m.field.sigma = 0.0;
  auto det = ensemble_ddm_solve(sp, std::vector<SampleProblem>{m.make_problem(constant_sample(1.0, 1.0))}, m.ddm);
  MeanFields ref{p1_part(*sp, det.solutions[0].velocity), det.solutions[0].pressure, det.solutions[0].head};
  auto r = mc_estimate(sp, 6, m, {1, 0, 0}, &ref);
  REQUIRE(r.error.has_value());
  CHECK(max_norm(*r.error) < 1e-8);

  // MLMC is unbiased for a deterministic input too
  MlmcConfig c;
  c.h0 = 1.0 / 4;
  c.levels = 1;
  c.samples = {4, 2};
  auto fine = make_spaces(refine(build_coupled_meshes(1.0 / 4)));
  auto d2 = ensemble_ddm_solve(fine, std::vector<SampleProblem>{m.make_problem(constant_sample(1.0, 1.0))}, m.ddm);
  MeanFields ref2{p1_part(*fine, d2.solutions[0].velocity), d2.solutions[0].pressure, d2.solutions[0].head};
  auto ml = mlmc_estimate(c, m, &ref2);
  CHECK(max_norm(*ml.error) < 1e-8);
}

TEST_CASE("telescoping identity") {
  auto m = model_with(1e-10);
  MlmcConfig c;
  c.h0 = 1.0 / 4;
  c.levels = 2;
  c.samples = {6, 6, 6};
  c.seed = 3;
  c.shared_level_keys = true;
  auto ml = mlmc_estimate(c, m);
  auto mc = mc_estimate(ml.spaces, 6, m, {3, 0, 0});
  CHECK(max_norm(mean_error(*ml.spaces, ml.mean, mc.mean)) < 1e-10);
  CHECK(ml.levels.size() == 3);
}

TEST_CASE("reduction does not depend on the thread count") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 8));
  auto m = model_with(1e-8);
  auto a = mc_estimate(sp, 5, m, {2, 0, 0});
  m.ddm.threads = 3;
  auto b = mc_estimate(sp, 5, m, {2, 0, 0});
  CHECK(max_diff(a.mean, b.mean) == 0.0);
}

TEST_CASE("config checks") {
  MlmcConfig c;
  c.levels = 2;
  c.samples = {8, 4};
  CHECK_THROWS_AS(validate(c), InputError);
  c.samples = {4, 8, 2};
  CHECK_THROWS_AS(validate(c), InputError);
  c.samples = {8, 4, 2};
  CHECK_NOTHROW(validate(c));
  c.coupling = LevelCoupling::uncoupled;
  c.shared_level_keys = true;
  CHECK_THROWS_AS(validate(c), InputError);
  CHECK_THROWS_AS(mc_estimate(make_spaces(build_coupled_meshes(0.25)), 0, default_uq_model(), {}), InputError);
}

TEST_CASE("geometric schedule") {
  CHECK(geometric_schedule(2, 4, 1) == std::vector<int>{512, 32, 2});
  CHECK(geometric_schedule(0, 4, 1) == std::vector<int>{2});
  CHECK(geometric_schedule(3, 1, 0) == std::vector<int>{8, 4, 2, 1});
}

TEST_CASE("prolongation") {
  auto cs = make_spaces(build_coupled_meshes(1.0 / 4));
  auto fs = make_spaces(refine(build_coupled_meshes(1.0 / 4)));

  CHECK(prolong(cs->zero(FieldKind::head), *cs, *fs).values.cwiseAbs().maxCoeff() == 0.0);

  // coarse vertices keep their values
  auto f = [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y) + x * y; };
  auto ch = interpolate_scalar(*cs, FieldKind::head, f);
  auto fh = prolong(ch, *cs, *fs);
  for (int v = 0; v < cs->nv_porous(); ++v) CHECK(fh.values(v) == doctest::Approx(ch.values(v)).epsilon(1e-14));

  // a P1 field is embedded exactly
  CHECK(field_norms(*fs, fh).l2 == doctest::Approx(field_norms(*cs, ch).l2).epsilon(1e-12));
  CHECK(field_norms(*fs, fh).h1_semi == doctest::Approx(field_norms(*cs, ch).h1_semi).epsilon(1e-12));

  // MINI velocity including bubbles
  auto cu = interpolate_velocity(*cs, [](double x, double y) { return Vec2{std::sin(x) * y * y, std::cos(2 * x) * y}; });
  auto fu = prolong(cu, *cs, *fs);
  CHECK(field_norms(*fs, fu).l2 == doctest::Approx(field_norms(*cs, cu).l2).epsilon(1e-3));
  auto p1 = p1_part(*cs, cu);
  auto fp1 = prolong(p1, *cs, *fs);
  CHECK(field_norms(*fs, fp1).l2 == doctest::Approx(field_norms(*cs, p1).l2).epsilon(1e-12));

  auto other = make_spaces(build_coupled_meshes(1.0 / 8));
  CHECK_THROWS(prolong(ch, *cs, *other));
}

TEST_CASE("fit rate") {
  std::vector<double> xs{40, 60, 80, 140, 220}, ys, lin;
  for (double x : xs) {
    ys.push_back(std::pow(x, -0.5));
    lin.push_back(3.7 * x);
  }
  CHECK(fit_rate(xs, ys) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit_rate(xs, lin) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_rate({1.0}, {1.0}), InputError);
  CHECK_THROWS_AS(fit_rate({1.0, -2.0}, {1.0, 2.0}), InputError);
}

TEST_CASE("mean field files round trip") {
  auto sp = make_spaces(build_coupled_meshes(1.0 / 4));
  MeanFields m{interpolate_velocity(*sp, [](double x, double y) { return Vec2{x, y}; }),
               interpolate_scalar(*sp, FieldKind::pressure, [](double x, double y) { return x - y; }),
               interpolate_scalar(*sp, FieldKind::head, [](double x, double y) { return x * y; })};
  const auto path = (std::filesystem::temp_directory_path() / "edd_mean_roundtrip.bin").string();
  save_mean_fields(path, m);
  auto back = load_mean_fields(path, *sp);
  REQUIRE(back.has_value());
  CHECK(max_diff(*back, m) == 0.0);
  auto other = make_spaces(build_coupled_meshes(1.0 / 8));
  CHECK_FALSE(load_mean_fields(path, *other).has_value());
  std::filesystem::remove(path);
  CHECK_FALSE(load_mean_fields(path, *sp).has_value());
}

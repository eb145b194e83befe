#include <doctest.h>

#include <cmath>
#include <numbers>

#include "edd/errors.hpp"
#include "edd/randfield.hpp"

using namespace edd;

namespace {

// independent evaluation of the truncated expansion in long double
long double field_ld(const RandomFieldParams& p, const std::vector<double>& y, long double yy) {
  const long double pi = std::numbers::pi_v<long double>, L = p.corr_len;
  const long double l0 = std::sqrt(pi * L) / 2.0L;
  long double k = p.a0 + p.sigma * std::sqrt(l0) * y[0];
  for (int i = 1; i <= p.n_terms; ++i) {
    const long double li = std::sqrt(pi) * L * std::exp(-(i * pi * L) * (i * pi * L) / 4.0L);
    k += p.sigma * std::sqrt(li) * (y[i] * std::cos(i * pi * yy) + y[p.n_terms + i] * std::sin(i * pi * yy));
  }
  return k;
}


EnsembleStats stats_of(std::initializer_list<double> ks) {
  std::vector<ConductivitySample> s;
  for (double k : ks) s.push_back(constant_sample(k, k));
  return ensemble_stats(std::span<const ConductivitySample>(s), 1.0, dense_y_grid(8), {{1.0, 0.0}, {2.0, 0.0}});
}

}  // namespace

TEST_CASE("kl eigenvalues") {
  RandomFieldParams p;
  auto ev = kl_eigenvalues(p);
  const long double pi = std::numbers::pi_v<long double>;
  CHECK(ev.lambda0 == doctest::Approx(static_cast<double>(std::sqrt(pi * 0.25L) / 2.0L)).epsilon(1e-15));
  REQUIRE(ev.lambda.size() == 3);
  const long double l1 = std::sqrt(pi) * 0.25L * std::exp(-(pi / 4.0L) * (pi / 4.0L) / 4.0L);
  CHECK(ev.lambda[0] == doctest::Approx(static_cast<double>(l1)).epsilon(1e-15));
  CHECK(ev.lambda[0] == doctest::Approx(0.37978).epsilon(1e-4));
  for (std::size_t i = 1; i < ev.lambda.size(); ++i) CHECK(ev.lambda[i] < ev.lambda[i - 1]);
  CHECK(worst_case_minimum(p) > 0.0);
}

TEST_CASE("expansion values") {
  RandomFieldParams p;
  std::vector<double> y = {0.3, -1.2, 0.7, 1.6, -0.4, 0.05, -1.7};
  auto s = ConductivitySample::expansion(p, y);
  for (double yy : {0.0, -0.1, -0.37, -0.5, -0.93, -1.0}) {
    const auto k = s(1.234, yy);
    CHECK(k.k11 == doctest::Approx(static_cast<double>(field_ld(p, y, yy))).epsilon(1e-14));
    CHECK(k.k22 == k.k11);
    // no x dependence
    CHECK(s(0.1, yy).k11 == k.k11);
  }
  CHECK_THROWS_AS(ConductivitySample::expansion(p, {1.0, 2.0}), InputError);
}

TEST_CASE("degenerate fields") {
  RandomFieldParams p;
  p.sigma = 0.0;
  auto s = sample_conductivity(p, {5, 0, 3});
  for (double yy : {0.0, -0.3, -1.0}) CHECK(s(0.5, yy).k11 == p.a0);

  RandomFieldParams q;
  auto z = ConductivitySample::expansion(q, std::vector<double>(7, 0.0));
  for (double yy : {0.0, -0.3, -1.0}) CHECK(z(0.5, yy).k22 == q.a0);
}

TEST_CASE("constant samples") {
  auto a = constant_sample(2.21, 2.21);
  CHECK(a(0.3, -0.2).k11 == 2.21);
  CHECK(a(0.3, -0.2).k22 == 2.21);
  auto b = constant_sample(2.11, 3.11);
  CHECK(b(1.0, -1.0).k11 == 2.11);
  CHECK(b(1.0, -1.0).k22 == 3.11);
  auto c = constant_sample(1, 1);
  CHECK(c(0, 0).k11 == 1.0);
  CHECK(c.is_constant());
  CHECK_THROWS_AS(constant_sample(0.0, 1.0), InputError);
  CHECK_THROWS_AS(constant_sample(1.0, -2.0), InputError);
}

TEST_CASE("reproducible streams") {
  SampleKey k{42, 3, 17};
  auto a = draw_coefficients(k, 7);
  auto b = draw_coefficients(k, 7);
  CHECK(a == b);
  // a longer draw extends the shorter one
  auto c = draw_coefficients(k, 20);
  for (int i = 0; i < 7; ++i) CHECK(c[i] == a[i]);
  CHECK(draw_coefficients({42, 3, 18}, 7) != a);
  CHECK(draw_coefficients({42, 4, 17}, 7) != a);
  CHECK(draw_coefficients({43, 3, 17}, 7) != a);
  // high words matter
  CHECK(draw_coefficients({42 + (1ull << 32), 3, 17}, 7) != a);

  RandomFieldParams p;
  auto s1 = sample_conductivity(p, k), s2 = sample_conductivity(p, k);
  CHECK(s1.coefficients() == s2.coefficients());
  CHECK(s1(0.0, -0.4).k11 == s2(0.0, -0.4).k11);
}

TEST_CASE("uniform inputs have unit variance") {
  auto y = draw_coefficients({9, 0, 0}, 1000000);
  double m = 0.0, v = 0.0, lo = 1e9, hi = -1e9;
  for (double x : y) {
    m += x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  m /= y.size();
  for (double x : y) v += (x - m) * (x - m);
  v /= (y.size() - 1);
  CHECK(v >= 0.99);
  CHECK(v <= 1.01);
  CHECK(std::abs(m) < 0.01);
  CHECK(lo >= -std::sqrt(3.0));
  CHECK(hi <= std::sqrt(3.0));
}

TEST_CASE("monte carlo mean of the field") {
  RandomFieldParams p;
  const int n = 100000;
  const double yy = -0.37;
  double m = 0.0, m2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double k = sample_conductivity(p, {11, 0, static_cast<std::uint64_t>(j)})(1.0, yy).k11;
    m += k;
    m2 += k * k;
  }
  m /= n;
  const double sd = std::sqrt(m2 / n - m * m);
  CHECK(std::abs(m - p.a0) < 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("positivity with defaults") {
  RandomFieldParams p;
  const auto grid = dense_y_grid(200);
  double kmin = 1e9;
  for (int j = 0; j < 10000; ++j) {
    auto s = sample_conductivity(p, {21, 0, static_cast<std::uint64_t>(j)});
    for (const auto& q : grid) kmin = std::min(kmin, s(q.x, q.y).k11);
  }
  CHECK(kmin > 0.0);
  CHECK(kmin >= worst_case_minimum(p));

  RandomFieldParams wild;
  wild.sigma = 5.0;
  int rejected = 0;
  for (int j = 0; j < 20; ++j) {
    try {
      sample_conductivity(wild, {1, 0, static_cast<std::uint64_t>(j)});
    } catch (const SamplingError&) {
      ++rejected;
    }
  }
  CHECK(rejected > 0);
}

TEST_CASE("ensemble stats") {
  SUBCASE("test 1 samples") {
    auto st = stats_of({2.21, 4.11, 6.21});
    for (const auto& k : st.k_mean) {
      CHECK(k.k11 == doctest::Approx((2.21 + 4.11 + 6.21) / 3).epsilon(1e-15));
      CHECK(k.k22 == doctest::Approx(4.176667).epsilon(1e-6));
    }
    CHECK(st.count == 3);
  }
  SUBCASE("single sample has no fluctuation") {
    auto st = stats_of({3.0});
    CHECK(st.rho_max_all == 0.0);
    CHECK(st.eta_fluct_max == 0.0);
    auto r = assumption_check(st);
    CHECK(r.eta_ok);
    CHECK(r.k_ok);
  }
  SUBCASE("eta of k = 4") {
    auto st = stats_of({4.0});
    for (double e : st.eta_mean) CHECK(e == 0.5);
  }
  SUBCASE("assumption margins") {
    auto a = assumption_check(stats_of({1.0, 3.0}));
    CHECK(a.k_ok);
    CHECK(a.k_margin == doctest::Approx(1.0));
    auto b = stats_of({1.0, 9.0});
    CHECK(b.k_mean_min == doctest::Approx(5.0));
    CHECK(b.rho_max_all == doctest::Approx(4.0));
    CHECK(assumption_check(b).k_ok);
    auto c = stats_of({0.1, 9.0});
    CHECK(c.k_mean_min == doctest::Approx(4.55));
    CHECK(c.rho_max_all == doctest::Approx(4.45));
    CHECK(assumption_check(c).k_ok);
  }
  SUBCASE("mean consistency for random samples") {
    RandomFieldParams p;
    std::vector<ConductivitySample> s;
    for (int j = 0; j < 25; ++j) s.push_back(sample_conductivity(p, {3, 0, static_cast<std::uint64_t>(j)}));
    const auto pts = dense_y_grid(64);
    auto st = ensemble_stats(std::span<const ConductivitySample>(s), 1.0, pts, {});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double m = 0.0;
      for (const auto& x : s) m += x(pts[i].x, pts[i].y).k11;
      CHECK(std::abs(m / s.size() - st.k_mean[i].k11) < 1e-14);
    }
  }
  CHECK_THROWS_AS(ensemble_stats(std::span<const ConductivitySample>(), 1.0, {}, {}), InputError);
}

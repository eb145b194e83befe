#include "edd/randfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "edd/errors.hpp"

namespace edd {

void validate(const RandomFieldParams& p) {
  require(p.a0 > 0.0, "random field: a0 must be positive");
  require(p.sigma >= 0.0, "random field: sigma must be nonnegative");
  require(p.corr_len > 0.0, "random field: correlation length must be positive");
  require(p.n_terms >= 0, "random field: n_f must be nonnegative");
}

KlEigenvalues kl_eigenvalues(const RandomFieldParams& p) {
  validate(p);
  KlEigenvalues ev;
  const double sqrt_pi = std::sqrt(M_PI);
  ev.lambda0 = std::sqrt(M_PI * p.corr_len) / 2.0;
  for (int i = 1; i <= p.n_terms; ++i) {
    const double a = i * M_PI * p.corr_len;
    ev.lambda.push_back(sqrt_pi * p.corr_len * std::exp(-a * a / 4.0));
  }
  return ev;
}

double worst_case_minimum(const RandomFieldParams& p) {
  const auto ev = kl_eigenvalues(p);
  double s = std::sqrt(ev.lambda0);
  for (double l : ev.lambda) s += 2.0 * std::sqrt(l);
  return p.a0 - p.sigma * std::sqrt(3.0) * s;
}

std::vector<double> draw_coefficients(const SampleKey& key, int count) {
  std::seed_seq seq{static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32),
                    static_cast<std::uint32_t>(key.level), static_cast<std::uint32_t>(key.level >> 32),
                    static_cast<std::uint32_t>(key.sample), static_cast<std::uint32_t>(key.sample >> 32)};
  std::mt19937_64 gen(seq);
  const double r = std::sqrt(3.0);
  std::vector<double> y(count);
  // 53-bit mantissa draw; avoids the implementation-defined distribution classes
  for (auto& v : y) v = -r + 2.0 * r * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
  return y;
}

ConductivitySample ConductivitySample::constant(double k11, double k22, int index) {
  require(k11 > 0.0 && k22 > 0.0, "constant_sample: values must be positive");
  ConductivitySample s;
  s.index_ = index;
  s.constant_ = DiagTensor{k11, k22};
  return s;
}

ConductivitySample ConductivitySample::expansion(const RandomFieldParams& p, std::vector<double> y, int index) {
  const auto ev = kl_eigenvalues(p);
  require(static_cast<int>(y.size()) == 2 * p.n_terms + 1, "expansion: need 2 n_f + 1 coefficients");
  ConductivitySample s;
  s.index_ = index;
  s.params_ = p;
  s.y_ = std::move(y);
  s.amp_.push_back(p.sigma * std::sqrt(ev.lambda0));
  for (double l : ev.lambda) s.amp_.push_back(p.sigma * std::sqrt(l));
  return s;
}

DiagTensor ConductivitySample::operator()(double /*x*/, double y) const {
  if (constant_) return *constant_;
  const int nf = params_.n_terms;
  double k = params_.a0 + amp_[0] * y_[0];
  for (int i = 1; i <= nf; ++i) {
    const double w = i * M_PI * y;
    k += amp_[i] * (y_[i] * std::cos(w) + y_[nf + i] * std::sin(w));
  }
  return {k, k};
}

TensorFn ConductivitySample::as_function() const {
  return [s = *this](double x, double y) { return s(x, y); };
}

ConductivitySample sample_conductivity(const RandomFieldParams& p, const SampleKey& key) {
  validate(p);
  auto s = ConductivitySample::expansion(p, draw_coefficients(key, 2 * p.n_terms + 1), static_cast<int>(key.sample));
  // field depends on y only; a dense grid bounds the minimum well
  double kmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 400; ++i) kmin = std::min(kmin, s.k11(0.0, -i / 400.0));
  if (kmin < p.positivity_floor)
    throw SamplingError("sample_conductivity: realisation below positivity floor (min " + std::to_string(kmin) + ")");
  return s;
}

ConductivitySample constant_sample(double k11, double k22) { return ConductivitySample::constant(k11, k22); }

std::vector<Vec2> dense_y_grid(int n_y) {
  std::vector<Vec2> pts;
  for (int i = 0; i <= n_y; ++i) pts.push_back({0.5 * M_PI, -static_cast<double>(i) / n_y});
  return pts;
}

EnsembleStats ensemble_stats(std::span<const TensorFn> samples, double alpha, const std::vector<Vec2>& eval_points,
                             const std::vector<Vec2>& interface_points) {
  require(!samples.empty(), "ensemble_stats: empty sample list");
  require(alpha > 0.0, "ensemble_stats: alpha must be positive");
  const double inv = 1.0 / static_cast<double>(samples.size());
  EnsembleStats st;
  st.count = static_cast<int>(samples.size());
  st.k_mean.assign(eval_points.size(), DiagTensor{0.0, 0.0});
  st.eta_mean.assign(interface_points.size(), 0.0);
  st.k_min = std::numeric_limits<double>::infinity();
  st.k_max = -st.k_min;
  for (const auto& k : samples) {
    for (std::size_t i = 0; i < eval_points.size(); ++i) {
      const DiagTensor v = k(eval_points[i].x, eval_points[i].y);
      st.k_mean[i].k11 += v.k11;
      st.k_mean[i].k22 += v.k22;
      st.k_min = std::min({st.k_min, v.k11, v.k22});
      st.k_max = std::max({st.k_max, v.k11, v.k22});
    }
    for (std::size_t i = 0; i < interface_points.size(); ++i)
      st.eta_mean[i] += alpha / std::sqrt(k(interface_points[i].x, interface_points[i].y).k11);
  }
  for (auto& m : st.k_mean) {
    m.k11 *= inv;
    m.k22 *= inv;
  }
  for (auto& e : st.eta_mean) e *= inv;

  st.k_mean_min = std::numeric_limits<double>::infinity();
  for (const auto& m : st.k_mean) st.k_mean_min = std::min({st.k_mean_min, m.k11, m.k22});
  st.eta_mean_min = std::numeric_limits<double>::infinity();
  for (double e : st.eta_mean) st.eta_mean_min = std::min(st.eta_mean_min, e);

  for (const auto& k : samples) {
    double rho = 0.0;
    for (std::size_t i = 0; i < eval_points.size(); ++i) {
      const DiagTensor v = k(eval_points[i].x, eval_points[i].y);
      rho = std::max({rho, std::abs(v.k11 - st.k_mean[i].k11), std::abs(v.k22 - st.k_mean[i].k22)});
    }
    st.rho_max.push_back(rho);
    st.rho_max_all = std::max(st.rho_max_all, rho);
    for (std::size_t i = 0; i < interface_points.size(); ++i) {
      const double eta = alpha / std::sqrt(k(interface_points[i].x, interface_points[i].y).k11);
      st.eta_fluct_max = std::max(st.eta_fluct_max, std::abs(eta - st.eta_mean[i]));
    }
  }
  return st;
}

EnsembleStats ensemble_stats(std::span<const ConductivitySample> samples, double alpha,
                             const std::vector<Vec2>& eval_points, const std::vector<Vec2>& interface_points) {
  std::vector<TensorFn> fns;
  for (const auto& s : samples) fns.push_back(s.as_function());
  return ensemble_stats(std::span<const TensorFn>(fns), alpha, eval_points, interface_points);
}

AssumptionReport assumption_check(const EnsembleStats& st) {
  AssumptionReport r;
  r.eta_margin = st.eta_mean_min - st.eta_fluct_max;
  r.k_margin = st.k_mean_min - st.rho_max_all;
  r.eta_ok = r.eta_margin > 0.0 || st.eta_mean.empty();
  r.k_ok = r.k_margin > 0.0;
  return r;
}

}  // namespace edd

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "edd/fem.hpp"

namespace edd {

struct RandomFieldParams {
  double a0 = 1.0;
  double sigma = 0.15;
  double corr_len = 0.25;
  int n_terms = 3;
  double positivity_floor = 1e-3;
};

void validate(const RandomFieldParams& p);

struct KlEigenvalues {
  double lambda0 = 0.0;
  std::vector<double> lambda;  // lambda_1 .. lambda_nf
};

KlEigenvalues kl_eigenvalues(const RandomFieldParams& p);
// a0 - sigma sqrt(3) (sqrt(l0) + 2 sum sqrt(li))
double worst_case_minimum(const RandomFieldParams& p);

struct SampleKey {
  std::uint64_t seed = 0;
  std::uint64_t level = 0;
  std::uint64_t sample = 0;
};

// Uniform draws on [-sqrt 3, sqrt 3], one stream per key; coefficient i is the i-th draw.
std::vector<double> draw_coefficients(const SampleKey& key, int count);

class ConductivitySample {
 public:
  static ConductivitySample constant(double k11, double k22, int index = 0);
  static ConductivitySample expansion(const RandomFieldParams& p, std::vector<double> y, int index = 0);

  int index() const { return index_; }
  const std::vector<double>& coefficients() const { return y_; }
  bool is_constant() const { return constant_.has_value(); }
  DiagTensor operator()(double x, double y) const;
  double k11(double x, double y) const { return (*this)(x, y).k11; }
  double k22(double x, double y) const { return (*this)(x, y).k22; }
  TensorFn as_function() const;

 private:
  int index_ = 0;
  std::optional<DiagTensor> constant_;
  RandomFieldParams params_;
  std::vector<double> y_;
  std::vector<double> amp_;  // sigma sqrt(lambda_i) for i = 0..nf
};

ConductivitySample sample_conductivity(const RandomFieldParams& p, const SampleKey& key);
ConductivitySample constant_sample(double k11, double k22);

struct EnsembleStats {
  int count = 0;
  std::vector<DiagTensor> k_mean;           // at eval points
  std::vector<double> eta_mean;             // at interface points
  std::vector<double> rho_max;              // per sample, max_x ||K_j - K_bar||_2
  double rho_max_all = 0.0;
  double eta_fluct_max = 0.0;               // max_j max_x |eta_j - eta_bar|
  double eta_mean_min = 0.0;
  double k_mean_min = 0.0;
  double k_min = 0.0;
  double k_max = 0.0;
};

EnsembleStats ensemble_stats(std::span<const TensorFn> samples, double alpha, const std::vector<Vec2>& eval_points,
                             const std::vector<Vec2>& interface_points);
EnsembleStats ensemble_stats(std::span<const ConductivitySample> samples, double alpha,
                             const std::vector<Vec2>& eval_points, const std::vector<Vec2>& interface_points);

// Points on [0,pi]x[-1,0]: n_y rows at x = pi/2 (fields of this kind vary in y only).
std::vector<Vec2> dense_y_grid(int n_y);

struct AssumptionReport {
  bool eta_ok = true;
  bool k_ok = true;
  double eta_margin = 0.0;  // eta_bar_min - eta'max
  double k_margin = 0.0;    // k_bar_min - rho'max
};

AssumptionReport assumption_check(const EnsembleStats& stats);

}  // namespace edd

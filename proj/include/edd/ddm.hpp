#pragma once

#include <Eigen/Core>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edd/fem.hpp"
#include "edd/randfield.hpp"

namespace edd {

struct TraceCoefficients {
  double a, b, c, d;
};

TraceCoefficients update_coefficients(double gamma_f, double gamma_p);

struct TracePair {
  Eigen::VectorXd delta_f;
  Eigen::VectorXd delta_p;
};

// delta_f' = a delta_p + b g phi,  delta_p' = c delta_f + d u.n
TracePair trace_update(const Eigen::VectorXd& delta_f, const Eigen::VectorXd& delta_p, const Eigen::VectorXd& u_normal,
                       const Eigen::VectorXd& phi_trace, const TraceCoefficients& k, double g);

struct RobinPair {
  double gamma_f = 1.0;
  double gamma_p = 1.0;
};

RobinPair optimal_robin_parameters(double mu_f, double det_k, double interface_length, double h);

enum class RobinMode { fixed, optimal };
enum class DetMode { determinant, k22_only };

struct DdmConfig {
  RobinMode mode = RobinMode::optimal;
  double gamma_f = 1.0;
  double gamma_p = 1.0;
  double tol = 1e-8;
  int max_iter = 200;
  double floor = 1e-30;
  PhysicalParams phys;
  double mu_f = 1.0;
  double c_f = 1.0;
  double c_p = 1.0;
  bool allow_gamma_f_above_gamma_p = false;
  DetMode det_mode = DetMode::determinant;
  bool record_velocity_increments = false;
  bool diagnostics = true;
  int threads = 1;
};

struct IterationHistory {
  int iterations = 0;
  bool converged = false;
  RobinPair gamma;
  std::vector<int> sample_iterations;             // first n with increment < tol, -1 if never
  std::vector<std::vector<double>> increments;    // [iter][sample]
  std::vector<std::vector<double>> velocity_increments;  // [iter][sample], L2 of u^{n+1}-u^n
  std::vector<double> wall_ms_darcy;
  std::vector<double> wall_ms_stokes;
  long long factorizations = 0;
  double setup_ms = 0.0;
  double total_ms = 0.0;
  double compatibility_residual = 0.0;  // max over samples, relative
};

struct SolutionFields {
  FieldVector velocity;
  FieldVector pressure;
  FieldVector head;
};

struct DdmResult {
  std::vector<SolutionFields> solutions;  // empty if a sink consumed them
  std::vector<TracePair> traces;          // final delta_f, delta_p
  IterationHistory history;
  std::optional<EnsembleStats> stats;
};

struct SolveOptions {
  // start from these traces (one per sample) instead of zero
  std::vector<TracePair> initial_traces;
  // if set, each final solution is handed over instead of stored
  std::function<void(int, SolutionFields&&)> sink;
};

DdmResult ensemble_ddm_solve(SpacesPtr spaces, std::span<const SampleProblem> samples, const DdmConfig& config,
                             const SolveOptions& options = {});

// Per-sample operators (no mean/fluctuation split); one factorization pair per call.
DdmResult traditional_ddm_solve(SpacesPtr spaces, const SampleProblem& sample, const DdmConfig& config,
                                const SolveOptions& options = {});

struct BatchResult {
  std::vector<SolutionFields> solutions;
  std::vector<IterationHistory> histories;
  long long factorizations = 0;
  double total_ms = 0.0;
};

BatchResult traditional_ddm_batch(SpacesPtr spaces, std::span<const SampleProblem> samples, const DdmConfig& config,
                                  bool keep_solutions = true);

struct ContractionReport {
  std::optional<double> observed_ratio;
  std::optional<double> e;    // empty when hypotheses fail
  std::optional<double> e_h;  // only for gamma_f == gamma_p
  std::string note;
};

ContractionReport contraction_diagnostics(const IterationHistory& history, const EnsembleStats& stats,
                                          const DdmConfig& config, double h);

// Compatibility residual of final traces against the fields, relative.
double compatibility_residual(const FeSpaces& spaces, const SolutionFields& s, const TracePair& t, RobinPair gamma,
                              double g);

void write_history_csv(std::ostream& os, const IterationHistory& history);

}  // namespace edd

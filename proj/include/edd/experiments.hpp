#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edd/config.hpp"
#include "edd/ddm.hpp"
#include "edd/uq.hpp"

namespace edd {

// Calibrated once on the (4.11, 1/32) row and frozen; see tolerance_window.
inline constexpr double kCalibratedItrTol = 4.4e-5;

// First n with history.increments[n-1][sample] < tol, -1 if never.
int first_passage(const IterationHistory& h, int sample, double tol);

struct TolWindow {
  bool found = false;
  double lo = 0.0;  // exclusive
  double hi = 0.0;  // inclusive
  double tol = 0.0;  // geometric midpoint
};

// Tolerances for which `sample` stops after exactly `target` iterations.
TolWindow tolerance_window(const IterationHistory& h, int sample, int target);

// ---- error table on the deterministic test
struct Table71Row {
  double k = 0.0;
  int n = 0;  // 1/h
  int itr = -1;
  bool converged = false;
  double u_l2 = 0.0, u_h1 = 0.0, p_l2 = 0.0, phi_l2 = 0.0, phi_h1 = 0.0;
};

struct Table71Result {
  std::vector<Table71Row> rows;
  std::vector<std::pair<int, IterationHistory>> histories;  // per mesh
  std::vector<RobinPair> gammas;                            // per mesh
};

Table71Result run_table71(const ExperimentConfig& c);
void write_table71_csv(std::ostream& os, const std::vector<Table71Row>& rows);

// ---- Robin parameter sweep
struct SweepRow {
  std::string set;  // isotropic | anisotropic
  int pair = 0;
  RobinPair gamma;
  bool optimal = false;
  int sample = 0;
  DiagTensor k;
  int itr = -1;
  std::vector<double> velocity_increments;
};

struct EqualGammaRow {
  int n = 0;
  int sample = 0;
  int itr = -1;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<EqualGammaRow> equal_gamma;
};

SweepResult run_robin_sweep(const ExperimentConfig& c);
// iteration counts of equal Robin parameters across c.mesh
std::vector<EqualGammaRow> run_equal_gamma_study(const ExperimentConfig& c);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_sweep_history_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_equal_gamma_csv(std::ostream& os, const std::vector<EqualGammaRow>& rows);

// ---- Test 2 Monte Carlo
SpacesPtr uq_spaces(const ExperimentConfig& c, int n);
// J0-sample mean on the mc_n mesh, cached under c.cache_dir when set
MeanFields reference_mean(const ExperimentConfig& c, SpacesPtr spaces);

struct McRow {
  int replicate = 0;
  int J = 0;
  double wall_ms = 0.0;
  bool converged = true;
  ErrorSummary error;
};

struct McResult {
  std::vector<McRow> rows;
  std::vector<int> J;
  std::vector<ErrorSummary> rms;  // per J, over replicates
  ErrorSummary rate;              // -slope of log rms against log J
};

McResult run_test2_mc(const ExperimentConfig& c);
void write_mc_csv(std::ostream& os, const std::vector<McRow>& rows);
void write_mc_summary_csv(std::ostream& os, const McResult& r);

// ---- Test 2 multilevel
struct CompareRow {
  std::string method;
  std::string schedule;
  double wall_ms = 0.0;
  bool converged = true;
  ErrorSummary error;
};

struct ConvergenceRow {
  int L = 0;
  double h = 0.0;
  std::string schedule;
  double wall_ms = 0.0;
  ErrorSummary error;
};

struct MlmcResult {
  EstimateReport mlmc;
  std::vector<CompareRow> compare;  // MLMC first, then MC rows
  std::vector<ConvergenceRow> convergence;
  double h1_rate = 0.0;  // fitted u-H1 rate in h^L
};

MlmcConfig mlmc_config(const ExperimentConfig& c, int L, int n0);
MlmcResult run_test2_mlmc(const ExperimentConfig& c);
void write_level_csv(std::ostream& os, const EstimateReport& r);
void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);

// ---- ensemble vs per-sample timing
struct CpuRow {
  int J = 0;
  double ensemble_ms = 0.0;
  double traditional_ms = 0.0;
  long long ensemble_factorizations = 0;
  long long traditional_factorizations = 0;
  int ensemble_iterations = 0;
  int traditional_iterations_max = 0;
  bool converged = true;
};

std::vector<ConductivitySample> cpu_samples(const ExperimentConfig& c, int J);
std::vector<CpuRow> run_cpu_table74(const ExperimentConfig& c);
void write_cpu_csv(std::ostream& os, const std::vector<CpuRow>& rows);

// ---- interface mass balance
struct MassRow {
  int n = 0;
  int sample = 0;
  bool converged = true;
  double max_mismatch = 0.0;
  double l2_mismatch = 0.0;
};

std::vector<MassRow> run_mass_conservation(const ExperimentConfig& c);
void write_mass_csv(std::ostream& os, const std::vector<MassRow>& rows);

// ---- driver
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDiverged = 2;

const std::vector<std::string>& experiment_names();
// Runs one experiment, writes its CSVs and manifest.json into out. Returns the exit code.
int run_experiment(const Settings& settings, const std::filesystem::path& out);

}  // namespace edd

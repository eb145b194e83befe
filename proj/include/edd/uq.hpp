#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "edd/ddm.hpp"
#include "edd/fem.hpp"
#include "edd/randfield.hpp"

namespace edd {

struct UqModel {
  RandomFieldParams field;
  DdmConfig ddm;
  std::function<SampleProblem(const ConductivitySample&)> make_problem;  // defaults to test2
};

UqModel default_uq_model();

// Sample means. Velocity holds the P1 part only (bubble entries zero).
struct MeanFields {
  FieldVector velocity;
  FieldVector pressure;
  FieldVector head;
};

struct ErrorSummary {
  double u_l2 = 0.0, u_h1 = 0.0, p_l2 = 0.0, phi_l2 = 0.0, phi_h1 = 0.0;
};

struct LevelReport {
  int level = 0;
  double h = 0.0;
  int samples = 0;
  double wall_ms = 0.0;
  int iterations = 0;
  bool converged = true;
  std::optional<ErrorSummary> error;  // error of the running estimate after this level
};

struct EstimateReport {
  SpacesPtr spaces;  // finest level
  MeanFields mean;
  std::optional<ErrorSummary> error;
  std::vector<LevelReport> levels;
  double wall_ms = 0.0;
  bool converged = true;
};

struct SampleStream {
  std::uint64_t seed = 0;
  std::uint64_t level = 0;
  std::uint64_t first = 0;  // index of the first sample
};

EstimateReport mc_estimate(SpacesPtr spaces, int samples, const UqModel& model, const SampleStream& stream,
                           const MeanFields* reference = nullptr);

enum class LevelCoupling { coupled, uncoupled };

struct MlmcConfig {
  double h0 = 1.0 / 8.0;
  double base_h = 0.0;         // > 0: level 0 is nested_meshes(base_h, h0)
  int levels = 2;              // L, finest index
  std::vector<int> samples;    // J^0 .. J^L
  std::uint64_t seed = 1;
  LevelCoupling coupling = LevelCoupling::coupled;
  bool shared_level_keys = false;  // every level draws from the same stream
};

void validate(const MlmcConfig& c);
// J^l = 2^{a (L - l) + b}
std::vector<int> geometric_schedule(int levels, int a, int b);

EstimateReport mlmc_estimate(const MlmcConfig& config, const UqModel& model, const MeanFields* reference = nullptr);

// Nodal (and barycentric, for bubbles) interpolation onto a nested finer mesh.
FieldVector prolong(const FieldVector& coarse, const FeSpaces& coarse_spaces, const FeSpaces& fine_spaces);
MeanFields prolong(const MeanFields& coarse, const FeSpaces& coarse_spaces, const FeSpaces& fine_spaces);

FieldVector p1_part(const FeSpaces& spaces, const FieldVector& u);
ErrorSummary mean_error(const FeSpaces& spaces, const MeanFields& estimate, const MeanFields& reference);

// least-squares slope of log(ys) against log(xs)
double fit_rate(const std::vector<double>& xs, const std::vector<double>& ys);

void save_mean_fields(const std::string& path, const MeanFields& m);
std::optional<MeanFields> load_mean_fields(const std::string& path, const FeSpaces& spaces);

}  // namespace edd

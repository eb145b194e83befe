#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "edd/ddm.hpp"
#include "edd/fem.hpp"
#include "edd/randfield.hpp"
#include "edd/uq.hpp"

namespace edd {

// Flat key=value store. Every key has a default; unknown keys are rejected.
class Settings {
 public:
  Settings();

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply(const std::string& assignment);
  // one assignment per line, '#' starts a comment
  void load_file(const std::string& path);
  void load(std::istream& is, const std::string& origin = "<stream>");

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  // "a:b,c:d"
  std::vector<std::pair<double, double>> pairs(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // sorted key=value lines
  std::string canonical() const;
  // FNV-1a over canonical()
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  std::string experiment;
  PhysicalParams phys;
  double mu_f = 1.0;
  RobinMode robin = RobinMode::optimal;
  RobinPair gamma;
  DetMode det_mode = DetMode::determinant;
  double tol = 1e-8;
  double itr_tol = 4.4e-5;  // iteration counts are reported at this level
  int max_iter = 200;
  RandomFieldParams field;

  std::vector<int> mesh;  // 1/h values
  std::vector<double> ks;

  int sweep_n = 32;
  std::vector<RobinPair> sweep_pairs;
  std::vector<DiagTensor> sweep_aniso;
  double equal_gamma = 1.0;
  int equal_gamma_max_iter = 2000;

  int base_n = 4;  // UQ meshes are refinements of the 1/base_n mesh
  int mc_n = 32;
  std::vector<int> mc_J;
  int mc_replicates = 16;
  int ref_J = 1000;
  std::uint64_t ref_seed = 1000003;

  int mlmc_L = 2;
  int mlmc_n0 = 8;
  int mlmc_a = 4;
  int mlmc_b = 1;
  LevelCoupling coupling = LevelCoupling::coupled;
  std::vector<int> mc_compare_J;
  std::vector<int> mlmc_conv_L;
  int mlmc_conv_n0 = 4;

  int cpu_n = 64;
  std::vector<int> cpu_J;
  double cpu_kmin = 1.0;
  double cpu_kmax = 2.0;

  std::vector<int> mass_mesh;
  int mass_J = 4;

  std::uint64_t seed = 1;
  int threads = 1;
  std::string cache_dir;

  DdmConfig ddm() const;
  UqModel uq_model() const;
};

ExperimentConfig experiment_config(const Settings& s);

}  // namespace edd

#include "edd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "edd/errors.hpp"
#include "edd/oracle.hpp"

namespace edd {

namespace {

// defaults reproduce the published settings
const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      {"experiment", "table71"},
      {"nu", "1"},
      {"g", "1"},
      {"alpha", "1"},
      {"z", "0"},
      {"mu_f", "1"},
      {"robin", "optimal"},
      {"gamma_f", "1"},
      {"gamma_p", "1"},
      {"det_mode", "determinant"},
      {"tol", "1e-8"},
      {"itr_tol", "4.4e-5"},
      {"max_iter", "200"},
      {"a0", "1"},
      {"sigma", "0.15"},
      {"corr_len", "0.25"},
      {"n_terms", "3"},
      {"positivity_floor", "1e-3"},
      {"mesh", "16,32,64,128"},
      {"ks", "2.21,4.11,6.21"},
      {"sweep_n", "32"},
      {"sweep_pairs", "0.1:0.1,0.1:10,10:10,1:1"},
      {"sweep_aniso", "2.11:3.11,4.11:5.21,6.21:1.21"},
      {"equal_gamma", "1"},
      {"equal_gamma_max_iter", "2000"},
      {"base_n", "4"},
      {"mc_n", "32"},
      {"mc_J", "40,60,80,140,220"},
      {"mc_replicates", "16"},
      {"ref_J", "1000"},
      {"ref_seed", "1000003"},
      {"mlmc_L", "2"},
      {"mlmc_n0", "8"},
      {"mlmc_a", "4"},
      {"mlmc_b", "1"},
      {"coupling", "coupled"},
      {"mc_compare_J", "60,80,512"},
      {"mlmc_conv_L", "1,2,3"},
      {"mlmc_conv_n0", "4"},
      {"cpu_n", "64"},
      {"cpu_J", "1,10,20,40,80,160"},
      {"cpu_kmin", "1"},
      {"cpu_kmax", "2"},
      {"mass_mesh", "8,16"},
      {"mass_J", "4"},
      {"seed", "1"},
      {"threads", "1"},
      {"cache_dir", ""},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw InputError("config: " + key + " expects a number, got '" + v + "'");
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InputError("config: " + key + " expects an integer, got '" + v + "'");
  return x;
}

void positive_list(const std::string& key, const std::vector<int>& v) {
  require(!v.empty(), "config: " + key + " must not be empty");
  for (int x : v) require(x >= 1, "config: " + key + " entries must be positive");
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

Settings::Settings() : values_(defaults()) {}

void Settings::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InputError("config: unknown key '" + key + "'");
  it->second = trim(value);
}

void Settings::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InputError("config: expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void Settings::load(std::istream& is, const std::string& origin) {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply(line);
    } catch (const InputError& e) {
      throw InputError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void Settings::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("config: cannot read " + path);
  load(is, path);
}

const std::string& Settings::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InputError("config: unknown key '" + key + "'");
  return it->second;
}

double Settings::number(const std::string& key) const { return to_double(key, get(key)); }

int Settings::integer(const std::string& key) const {
  const long long x = to_integer(key, get(key));
  require(x >= -2147483647LL && x <= 2147483647LL, "config: " + key + " out of range");
  return static_cast<int>(x);
}

std::uint64_t Settings::unsigned_integer(const std::string& key) const {
  const long long x = to_integer(key, get(key));
  require(x >= 0, "config: " + key + " must be nonnegative");
  return static_cast<std::uint64_t>(x);
}

std::vector<double> Settings::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& t : split(get(key), ',')) out.push_back(to_double(key, t));
  return out;
}

std::vector<int> Settings::integers(const std::string& key) const {
  std::vector<int> out;
  for (const auto& t : split(get(key), ',')) out.push_back(static_cast<int>(to_integer(key, t)));
  return out;
}

std::vector<std::pair<double, double>> Settings::pairs(const std::string& key) const {
  std::vector<std::pair<double, double>> out;
  for (const auto& t : split(get(key), ',')) {
    const auto parts = split(t, ':');
    if (parts.size() != 2) throw InputError("config: " + key + " expects a:b pairs, got '" + t + "'");
    out.emplace_back(to_double(key, parts[0]), to_double(key, parts[1]));
  }
  return out;
}

std::string Settings::canonical() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
  return s;
}

std::uint64_t Settings::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

DdmConfig ExperimentConfig::ddm() const {
  DdmConfig c;
  c.mode = robin;
  c.gamma_f = gamma.gamma_f;
  c.gamma_p = gamma.gamma_p;
  c.tol = tol;
  c.max_iter = max_iter;
  c.phys = phys;
  c.mu_f = mu_f;
  c.det_mode = det_mode;
  c.threads = threads;
  return c;
}

UqModel ExperimentConfig::uq_model() const {
  UqModel m;
  m.field = field;
  m.ddm = ddm();
  m.ddm.diagnostics = false;
  m.make_problem = [phys = phys](const ConductivitySample& s) { return test2_case(s, phys).problem; };
  return m;
}

ExperimentConfig experiment_config(const Settings& s) {
  ExperimentConfig c;
  c.experiment = s.get("experiment");
  c.phys.nu = s.number("nu");
  c.phys.g = s.number("g");
  c.phys.alpha = s.number("alpha");
  require(c.phys.nu > 0.0 && c.phys.g > 0.0 && c.phys.alpha > 0.0, "config: nu, g and alpha must be positive");
  // the head is the scaled pressure only for a zero reference height
  require(s.number("z") == 0.0, "config: only z=0 is supported");
  c.mu_f = s.number("mu_f");
  require(c.mu_f > 0.0, "config: mu_f must be positive");

  const std::string& robin = s.get("robin");
  if (robin == "optimal")
    c.robin = RobinMode::optimal;
  else if (robin == "fixed")
    c.robin = RobinMode::fixed;
  else
    throw InputError("config: robin must be optimal or fixed");
  c.gamma = {s.number("gamma_f"), s.number("gamma_p")};
  require(c.gamma.gamma_f > 0.0 && c.gamma.gamma_p > 0.0, "config: Robin parameters must be positive");
  const std::string& det = s.get("det_mode");
  if (det == "determinant")
    c.det_mode = DetMode::determinant;
  else if (det == "k22_only")
    c.det_mode = DetMode::k22_only;
  else
    throw InputError("config: det_mode must be determinant or k22_only");

  c.tol = s.number("tol");
  c.itr_tol = s.number("itr_tol");
  c.max_iter = s.integer("max_iter");
  require(c.tol > 0.0 && c.itr_tol > 0.0 && c.max_iter >= 1, "config: bad stopping parameters");

  c.field.a0 = s.number("a0");
  c.field.sigma = s.number("sigma");
  c.field.corr_len = s.number("corr_len");
  c.field.n_terms = s.integer("n_terms");
  c.field.positivity_floor = s.number("positivity_floor");
  validate(c.field);

  c.mesh = s.integers("mesh");
  positive_list("mesh", c.mesh);
  c.ks = s.numbers("ks");
  require(!c.ks.empty(), "config: ks must not be empty");
  for (double k : c.ks) require(k > 0.0, "config: ks must be positive");

  c.sweep_n = s.integer("sweep_n");
  require(c.sweep_n >= 1, "config: sweep_n must be positive");
  for (auto [f, p] : s.pairs("sweep_pairs")) {
    require(f > 0.0 && p > 0.0, "config: sweep pairs must be positive");
    c.sweep_pairs.push_back({f, p});
  }
  for (auto [a, b] : s.pairs("sweep_aniso")) {
    require(a > 0.0 && b > 0.0, "config: sweep_aniso entries must be positive");
    c.sweep_aniso.push_back({a, b});
  }
  c.equal_gamma = s.number("equal_gamma");
  c.equal_gamma_max_iter = s.integer("equal_gamma_max_iter");
  require(c.equal_gamma > 0.0 && c.equal_gamma_max_iter >= 1, "config: bad equal_gamma settings");

  c.base_n = s.integer("base_n");
  c.mc_n = s.integer("mc_n");
  c.mlmc_n0 = s.integer("mlmc_n0");
  c.mlmc_conv_n0 = s.integer("mlmc_conv_n0");
  require(c.base_n >= 1, "config: base_n must be positive");
  for (int n : {c.mc_n, c.mlmc_n0, c.mlmc_conv_n0})
    require(n >= c.base_n && n % c.base_n == 0 && power_of_two(n / c.base_n),
            "config: UQ mesh sizes must be base_n times a power of two");
  c.mc_J = s.integers("mc_J");
  positive_list("mc_J", c.mc_J);
  c.mc_replicates = s.integer("mc_replicates");
  c.ref_J = s.integer("ref_J");
  require(c.mc_replicates >= 1 && c.ref_J >= 1, "config: mc_replicates and ref_J must be positive");
  c.ref_seed = s.unsigned_integer("ref_seed");

  c.mlmc_L = s.integer("mlmc_L");
  c.mlmc_a = s.integer("mlmc_a");
  c.mlmc_b = s.integer("mlmc_b");
  require(c.mlmc_L >= 0 && c.mlmc_a >= 0 && c.mlmc_b >= 0, "config: MLMC schedule parameters must be nonnegative");
  require(c.mlmc_a * c.mlmc_L + c.mlmc_b < 30, "config: MLMC schedule too large");
  const std::string& coupling = s.get("coupling");
  if (coupling == "coupled")
    c.coupling = LevelCoupling::coupled;
  else if (coupling == "uncoupled")
    c.coupling = LevelCoupling::uncoupled;
  else
    throw InputError("config: coupling must be coupled or uncoupled");
  c.mc_compare_J = s.integers("mc_compare_J");
  positive_list("mc_compare_J", c.mc_compare_J);
  c.mlmc_conv_L = s.integers("mlmc_conv_L");
  for (int l : c.mlmc_conv_L) require(l >= 0 && c.mlmc_a * l + c.mlmc_b < 30, "config: bad mlmc_conv_L entry");

  c.cpu_n = s.integer("cpu_n");
  c.cpu_J = s.integers("cpu_J");
  positive_list("cpu_J", c.cpu_J);
  c.cpu_kmin = s.number("cpu_kmin");
  c.cpu_kmax = s.number("cpu_kmax");
  require(c.cpu_n >= 1 && c.cpu_kmin > 0.0 && c.cpu_kmax >= c.cpu_kmin, "config: bad cpu_table74 settings");

  c.mass_mesh = s.integers("mass_mesh");
  positive_list("mass_mesh", c.mass_mesh);
  c.mass_J = s.integer("mass_J");
  require(c.mass_J >= 1, "config: mass_J must be positive");

  c.seed = s.unsigned_integer("seed");
  c.threads = s.integer("threads");
  require(c.threads >= 1, "config: threads must be positive");
  c.cache_dir = s.get("cache_dir");
  return c;
}

}  // namespace edd

#include "edd/uq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "edd/errors.hpp"
#include "edd/oracle.hpp"

namespace edd {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Bucket grid over a triangulation for point location.
class Locator {
 public:
  explicit Locator(const TriMesh& m) : mesh_(m) {
    xmin_ = ymin_ = 1e300;
    double xmax = -1e300, ymax = -1e300;
    for (const auto& v : m.vertices) {
      xmin_ = std::min(xmin_, v.x);
      ymin_ = std::min(ymin_, v.y);
      xmax = std::max(xmax, v.x);
      ymax = std::max(ymax, v.y);
    }
    n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(m.num_triangles()) / 2.0)));
    dx_ = (xmax - xmin_) / n_;
    dy_ = (ymax - ymin_) / n_;
    cells_.resize(static_cast<std::size_t>(n_) * n_);
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
      for (int k = 0; k < 3; ++k) {
        const Point& p = m.vertices[m.triangles[t][k]];
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
      }
      for (int j = cell_y(y0); j <= cell_y(y1); ++j)
        for (int i = cell_x(x0); i <= cell_x(x1); ++i) cells_[j * n_ + i].push_back(static_cast<int>(t));
    }
  }

  std::array<double, 3> bary(int t, const Point& p) const {
    const auto& tri = mesh_.triangles[t];
    const Point& a = mesh_.vertices[tri[0]];
    const Point& b = mesh_.vertices[tri[1]];
    const Point& c = mesh_.vertices[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    return {1.0 - l1 - l2, l1, l2};
  }

  // triangle containing p, -1 if none
  int find(const Point& p) const {
    const int i = cell_x(p.x), j = cell_y(p.y);
    for (int t : cells_[j * n_ + i]) {
      const auto b = bary(t, p);
      if (b[0] >= -1e-10 && b[1] >= -1e-10 && b[2] >= -1e-10) return t;
    }
    return -1;
  }

 private:
  int cell_x(double x) const { return std::clamp(static_cast<int>((x - xmin_) / dx_), 0, n_ - 1); }
  int cell_y(double y) const { return std::clamp(static_cast<int>((y - ymin_) / dy_), 0, n_ - 1); }

  const TriMesh& mesh_;
  double xmin_, ymin_, dx_, dy_;
  int n_;
  std::vector<std::vector<int>> cells_;
};

// Per fine vertex: coarse triangle and barycentric weights. Checks nestedness.
struct Transfer {
  std::vector<int> tri;
  std::vector<std::array<double, 3>> w;
};

Transfer make_transfer(const TriMesh& coarse, const TriMesh& fine) {
  Locator loc(coarse);
  Transfer tr;
  for (const auto& v : fine.vertices) {
    const int t = loc.find(v);
    require(t >= 0, "prolong: fine vertex outside the coarse mesh");
    tr.tri.push_back(t);
    tr.w.push_back(loc.bary(t, v));
  }
  // every fine triangle must sit inside a single coarse triangle
  for (const auto& ft : fine.triangles) {
    const Point& a = fine.vertices[ft[0]];
    const Point& b = fine.vertices[ft[1]];
    const Point& c = fine.vertices[ft[2]];
    const Point g{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
    const int t = loc.find(g);
    require(t >= 0, "prolong: meshes are not nested");
    for (int k = 0; k < 3; ++k) {
      const auto bb = loc.bary(t, fine.vertices[ft[k]]);
      require(bb[0] >= -1e-10 && bb[1] >= -1e-10 && bb[2] >= -1e-10, "prolong: meshes are not nested");
    }
  }
  return tr;
}

struct Accumulator {
  Eigen::VectorXd u, p, phi;  // u holds ux|uy at vertices
};

MeanFields to_mean(const FeSpaces& sp, const Accumulator& a, double inv) {
  MeanFields m{sp.zero(FieldKind::velocity), sp.zero(FieldKind::pressure), sp.zero(FieldKind::head)};
  m.velocity.values.head(a.u.size()) = a.u * inv;
  m.pressure.values = a.p * inv;
  m.head.values = a.phi * inv;
  return m;
}

struct LevelSolve {
  MeanFields mean;
  std::vector<Accumulator> members;  // kept only on request
  int iterations = 0;
  bool converged = true;
};

LevelSolve solve_level(SpacesPtr spaces, const std::vector<ConductivitySample>& samples, const UqModel& model,
                       bool keep_members) {
  const FeSpaces& sp = *spaces;
  const int nj = static_cast<int>(samples.size());
  std::vector<SampleProblem> problems;
  problems.reserve(nj);
  for (const auto& s : samples) problems.push_back(model.make_problem(s));
  std::vector<Accumulator> per(nj);
  SolveOptions opt;
  const int nv = sp.nv_fluid();
  opt.sink = [&](int j, SolutionFields&& s) {
    per[j] = {s.velocity.values.head(2 * nv), std::move(s.pressure.values), std::move(s.head.values)};
  };
  DdmResult r = ensemble_ddm_solve(spaces, problems, model.ddm, opt);
  Accumulator sum{Eigen::VectorXd::Zero(2 * nv), Eigen::VectorXd::Zero(nv), Eigen::VectorXd::Zero(sp.nv_porous())};
  for (const auto& a : per) {  // fixed order
    sum.u += a.u;
    sum.p += a.p;
    sum.phi += a.phi;
  }
  LevelSolve out;
  out.mean = to_mean(sp, sum, 1.0 / nj);
  out.iterations = r.history.iterations;
  out.converged = r.history.converged;
  if (keep_members) out.members = std::move(per);
  return out;
}

std::vector<ConductivitySample> draw(const RandomFieldParams& p, const SampleStream& s, int n) {
  std::vector<ConductivitySample> out;
  out.reserve(n);
  for (int j = 0; j < n; ++j) out.push_back(sample_conductivity(p, {s.seed, s.level, s.first + j}));
  return out;
}

void add_scaled(MeanFields& acc, const MeanFields& x, double s) {
  acc.velocity.values += s * x.velocity.values;
  acc.pressure.values += s * x.pressure.values;
  acc.head.values += s * x.head.values;
}

}  // namespace

UqModel default_uq_model() {
  UqModel m;
  m.make_problem = [phys = m.ddm.phys](const ConductivitySample& s) { return test2_case(s, phys).problem; };
  return m;
}

FieldVector p1_part(const FeSpaces& sp, const FieldVector& u) {
  require(u.kind == FieldKind::velocity && u.values.size() == sp.size(FieldKind::velocity), "p1_part: velocity expected");
  FieldVector out = u;
  out.values.tail(2 * sp.nt_fluid()).setZero();
  return out;
}

FieldVector prolong(const FieldVector& coarse, const FeSpaces& cs, const FeSpaces& fs) {
  require(coarse.values.size() == cs.size(coarse.kind), "prolong: field does not belong to the coarse space");
  require(coarse.kind != FieldKind::trace, "prolong: trace fields are not supported");
  const bool porous = coarse.kind == FieldKind::head;
  const TriMesh& cm = porous ? cs.porous_mesh() : cs.fluid_mesh();
  const TriMesh& fm = porous ? fs.porous_mesh() : fs.fluid_mesh();
  const Transfer tr = make_transfer(cm, fm);
  FieldVector out = fs.zero(coarse.kind);
  if (coarse.kind != FieldKind::velocity) {
    for (std::size_t v = 0; v < fm.num_vertices(); ++v) {
      const auto& t = cm.triangles[tr.tri[v]];
      out.values(v) = tr.w[v][0] * coarse.values(t[0]) + tr.w[v][1] * coarse.values(t[1]) + tr.w[v][2] * coarse.values(t[2]);
    }
    return out;
  }
  const int nvf = fs.nv_fluid(), ntf = fs.nt_fluid();
  for (int v = 0; v < nvf; ++v) {
    const Vec2 u = eval_velocity(cs, coarse, tr.tri[v], tr.w[v]);
    out.values(v) = u.x;
    out.values(nvf + v) = u.y;
  }
  // fine bubbles: coarse value at the fine barycentre minus the fine P1 part there
  Locator loc(cm);
  for (int t = 0; t < ntf; ++t) {
    const auto& ft = fm.triangles[t];
    const Point g{(fm.vertices[ft[0]].x + fm.vertices[ft[1]].x + fm.vertices[ft[2]].x) / 3.0,
                  (fm.vertices[ft[0]].y + fm.vertices[ft[1]].y + fm.vertices[ft[2]].y) / 3.0};
    const int ct = loc.find(g);
    const Vec2 u = eval_velocity(cs, coarse, ct, loc.bary(ct, g));
    double mx = 0.0, my = 0.0;
    for (int k = 0; k < 3; ++k) {
      mx += out.values(ft[k]) / 3.0;
      my += out.values(nvf + ft[k]) / 3.0;
    }
    out.values(2 * nvf + t) = u.x - mx;
    out.values(2 * nvf + ntf + t) = u.y - my;
  }
  return out;
}

MeanFields prolong(const MeanFields& c, const FeSpaces& cs, const FeSpaces& fs) {
  return {p1_part(fs, prolong(c.velocity, cs, fs)), prolong(c.pressure, cs, fs), prolong(c.head, cs, fs)};
}

ErrorSummary mean_error(const FeSpaces& sp, const MeanFields& e, const MeanFields& r) {
  auto diff = [](const FieldVector& a, const FieldVector& b) { return FieldVector{a.kind, a.values - b.values}; };
  const FieldNorms nu = field_norms(sp, diff(p1_part(sp, e.velocity), p1_part(sp, r.velocity)));
  const FieldNorms np = field_norms(sp, diff(e.pressure, r.pressure));
  const FieldNorms nh = field_norms(sp, diff(e.head, r.head));
  return {nu.l2, nu.h1, np.l2, nh.l2, nh.h1};
}

EstimateReport mc_estimate(SpacesPtr spaces, int samples, const UqModel& model, const SampleStream& stream,
                           const MeanFields* reference) {
  require(samples >= 1, "mc_estimate: need at least one sample");
  const auto t0 = Clock::now();
  LevelSolve ls = solve_level(spaces, draw(model.field, stream, samples), model, false);
  EstimateReport rep;
  rep.spaces = spaces;
  rep.mean = std::move(ls.mean);
  rep.wall_ms = ms_since(t0);
  rep.converged = ls.converged;
  if (reference) rep.error = mean_error(*spaces, rep.mean, *reference);
  rep.levels.push_back({0, spaces->h(), samples, rep.wall_ms, ls.iterations, ls.converged, rep.error});
  return rep;
}

void validate(const MlmcConfig& c) {
  require(c.levels >= 0, "mlmc: L must be nonnegative");
  require(c.h0 > 0.0, "mlmc: h0 must be positive");
  require(static_cast<int>(c.samples.size()) == c.levels + 1, "mlmc: need one sample count per level");
  for (std::size_t l = 0; l < c.samples.size(); ++l) {
    require(c.samples[l] >= 1, "mlmc: sample counts must be positive");
    require(l == 0 || c.samples[l] <= c.samples[l - 1], "mlmc: sample counts must be nonincreasing");
  }
  if (c.coupling == LevelCoupling::uncoupled)
    require(!c.shared_level_keys, "mlmc: shared level keys only make sense for coupled sampling");
}

std::vector<int> geometric_schedule(int levels, int a, int b) {
  std::vector<int> j;
  for (int l = 0; l <= levels; ++l) j.push_back(1 << (a * (levels - l) + b));
  return j;
}

EstimateReport mlmc_estimate(const MlmcConfig& cfg, const UqModel& model, const MeanFields* reference) {
  validate(cfg);
  const auto t0 = Clock::now();
  std::vector<SpacesPtr> sp{
      make_spaces(cfg.base_h > 0.0 ? nested_meshes(cfg.base_h, cfg.h0) : build_coupled_meshes(cfg.h0))};
  for (int l = 1; l <= cfg.levels; ++l) sp.push_back(make_spaces(refine(sp.back()->meshes())));
  const FeSpaces& fine = *sp.back();

  // chained prolongation to the finest level
  auto lift = [&](MeanFields m, int from) {
    for (int l = from; l < cfg.levels; ++l) m = prolong(m, *sp[l], *sp[l + 1]);
    return m;
  };

  EstimateReport rep;
  rep.spaces = sp.back();
  rep.mean = {fine.zero(FieldKind::velocity), fine.zero(FieldKind::pressure), fine.zero(FieldKind::head)};
  const bool keep = cfg.coupling == LevelCoupling::uncoupled;
  std::vector<Accumulator> previous;  // fine members of the last level (uncoupled mode)
  for (int l = 0; l <= cfg.levels; ++l) {
    const auto tl = Clock::now();
    const SampleStream stream{cfg.seed, cfg.shared_level_keys ? 0u : static_cast<std::uint64_t>(l), 0};
    const auto samples = draw(model.field, stream, cfg.samples[l]);
    LevelSolve f = solve_level(sp[l], samples, model, keep);
    add_scaled(rep.mean, lift(f.mean, l), 1.0);
    LevelReport lr{l, sp[l]->h(), cfg.samples[l], 0.0, f.iterations, f.converged, std::nullopt};
    if (l > 0) {
      MeanFields coarse;
      if (cfg.coupling == LevelCoupling::coupled) {
        LevelSolve c = solve_level(sp[l - 1], samples, model, false);
        lr.iterations = std::max(lr.iterations, c.iterations);
        lr.converged = lr.converged && c.converged;
        coarse = std::move(c.mean);
      } else {
        std::vector<int> idx(previous.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 gen(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(l));
        std::shuffle(idx.begin(), idx.end(), gen);
        const FeSpaces& cs = *sp[l - 1];
        Accumulator sum{Eigen::VectorXd::Zero(2 * cs.nv_fluid()), Eigen::VectorXd::Zero(cs.nv_fluid()),
                        Eigen::VectorXd::Zero(cs.nv_porous())};
        for (int j = 0; j < cfg.samples[l]; ++j) {
          sum.u += previous[idx[j]].u;
          sum.p += previous[idx[j]].p;
          sum.phi += previous[idx[j]].phi;
        }
        coarse = to_mean(cs, sum, 1.0 / cfg.samples[l]);
      }
      add_scaled(rep.mean, lift(coarse, l - 1), -1.0);
    }
    if (keep) previous = std::move(f.members);
    lr.wall_ms = ms_since(tl);
    if (reference) lr.error = mean_error(fine, rep.mean, *reference);
    rep.converged = rep.converged && lr.converged;
    rep.levels.push_back(lr);
  }
  rep.wall_ms = ms_since(t0);
  if (reference) rep.error = mean_error(fine, rep.mean, *reference);
  return rep;
}

double fit_rate(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, "fit_rate: need at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > 0.0 && ys[i] > 0.0, "fit_rate: data must be positive");
    mx += std::log(xs[i]) / n;
    my += std::log(ys[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, "fit_rate: abscissae must not all coincide");
  return sxy / sxx;
}

void save_mean_fields(const std::string& path, const MeanFields& m) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "save_mean_fields: cannot open " + path);
  for (const FieldVector* f : {&m.velocity, &m.pressure, &m.head}) {
    const std::int64_t n = f->values.size();
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(f->values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
}

std::optional<MeanFields> load_mean_fields(const std::string& path, const FeSpaces& sp) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  MeanFields m{sp.zero(FieldKind::velocity), sp.zero(FieldKind::pressure), sp.zero(FieldKind::head)};
  for (FieldVector* f : {&m.velocity, &m.pressure, &m.head}) {
    std::int64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || n != f->values.size()) return std::nullopt;
    is.read(reinterpret_cast<char*>(f->values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) return std::nullopt;
  }
  return m;
}

}  // namespace edd

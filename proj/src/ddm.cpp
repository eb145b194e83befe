#include "edd/ddm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "edd/errors.hpp"
#include "edd/linalg.hpp"
#include "edd/log.hpp"
#include "edd/parallel.hpp"

namespace edd {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void zero_ends(Eigen::VectorXd& t) {
  if (t.size() == 0) return;
  t(0) = 0.0;
  t(t.size() - 1) = 0.0;
}

double mean_det(const FeSpaces& sp, const std::vector<DiagTensor>& k_int, DetMode mode) {
  double num = 0.0, area = 0.0;
  for (std::size_t t = 0; t < k_int.size(); ++t) {
    const double a = sp.porous_elements()[t].area;
    const double k11 = k_int[t].k11 / a, k22 = k_int[t].k22 / a;
    num += a * (mode == DetMode::determinant ? k11 * k22 : k22);
    area += a;
  }
  return num / area;
}

}  // namespace

TraceCoefficients update_coefficients(double gamma_f, double gamma_p) {
  require(gamma_f > 0.0 && gamma_p > 0.0, "update_coefficients: Robin parameters must be positive");
  const double r = gamma_f / gamma_p;
  return {r, -1.0 - r, -1.0, gamma_f + gamma_p};
}

TracePair trace_update(const Eigen::VectorXd& delta_f, const Eigen::VectorXd& delta_p, const Eigen::VectorXd& u_normal,
                       const Eigen::VectorXd& phi_trace, const TraceCoefficients& k, double g) {
  const auto n = delta_f.size();
  require(delta_p.size() == n && u_normal.size() == n && phi_trace.size() == n, "trace_update: length mismatch");
  TracePair out;
  out.delta_f = k.a * delta_p + (k.b * g) * phi_trace;
  out.delta_p = k.c * delta_f + k.d * u_normal;
  return out;
}

RobinPair optimal_robin_parameters(double mu_f, double det_k, double interface_length, double h) {
  require(mu_f > 0.0 && det_k > 0.0 && interface_length > 0.0 && h > 0.0,
          "optimal_robin_parameters: inputs must be positive");
  const double smin = M_PI / interface_length, smax = M_PI / h;
  const double t = (1.0 - 2.0 * mu_f * det_k * smin * smax) / (det_k * (smin + smax));
  const double s = 2.0 * mu_f / det_k;
  const double root = std::sqrt(t * t + s);
  // the smaller root via the product identity, avoiding cancellation
  if (t < 0.0) {
    const double gp = root - t;
    return {s / gp, gp};
  }
  const double gf = t + root;
  return {gf, s / gf};
}

DdmResult ensemble_ddm_solve(SpacesPtr spaces, std::span<const SampleProblem> samples, const DdmConfig& cfg,
                             const SolveOptions& opt) {
  require(!samples.empty(), "ensemble_ddm_solve: no samples");
  require(cfg.tol > 0.0 && cfg.max_iter >= 1, "ensemble_ddm_solve: bad stopping parameters");
  require(cfg.phys.alpha > 0.0 && cfg.phys.nu > 0.0, "ensemble_ddm_solve: bad physical parameters");
  require(opt.initial_traces.empty() || opt.initial_traces.size() == samples.size(),
          "ensemble_ddm_solve: one initial trace pair per sample");
  const auto t_start = Clock::now();
  const FeSpaces& sp = *spaces;
  const int nj = static_cast<int>(samples.size());
  const int ng = sp.n_trace();
  const double g = cfg.phys.g;
  for (const auto& s : samples) require(static_cast<bool>(s.conductivity), "ensemble_ddm_solve: sample without K");

  DdmResult res;
  auto& hist = res.history;
  const long long fact0 = factorization_count();

  // ensemble means
  std::vector<std::vector<DiagTensor>> k_int(nj);
  std::vector<std::vector<double>> eta(nj);
  parallel_for(nj, cfg.threads, [&](int j) {
    k_int[j] = cell_integrals(sp, samples[j].conductivity);
    eta[j] = interface_eta(sp, samples[j].conductivity, cfg.phys.alpha);
  });
  const std::size_t nt = sp.porous_elements().size();
  std::vector<DiagTensor> k_bar(nt, DiagTensor{0.0, 0.0});
  std::vector<double> eta_bar(sp.n_gamma_points(), 0.0);
  for (int j = 0; j < nj; ++j) {
    for (std::size_t t = 0; t < nt; ++t) {
      k_bar[t].k11 += k_int[j][t].k11;
      k_bar[t].k22 += k_int[j][t].k22;
    }
    for (std::size_t q = 0; q < eta_bar.size(); ++q) eta_bar[q] += eta[j][q];
  }
  for (auto& k : k_bar) {
    k.k11 /= nj;
    k.k22 /= nj;
  }
  for (auto& e : eta_bar) e /= nj;

  std::vector<std::vector<DiagTensor>> dk(nj);
  std::vector<std::vector<double>> deta(nj);
  std::vector<char> fluct(nj, 0);
  for (int j = 0; j < nj; ++j) {
    dk[j].resize(nt);
    deta[j].resize(eta_bar.size());
    for (std::size_t t = 0; t < nt; ++t) {
      dk[j][t] = {k_int[j][t].k11 - k_bar[t].k11, k_int[j][t].k22 - k_bar[t].k22};
      if (dk[j][t].k11 != 0.0 || dk[j][t].k22 != 0.0) fluct[j] = 1;
    }
    for (std::size_t q = 0; q < eta_bar.size(); ++q) {
      deta[j][q] = eta[j][q] - eta_bar[q];
      if (deta[j][q] != 0.0) fluct[j] = 1;
    }
  }
  k_int.clear();
  eta.clear();

  // Robin parameters
  RobinPair gamma{cfg.gamma_f, cfg.gamma_p};
  if (cfg.mode == RobinMode::optimal)
    gamma = optimal_robin_parameters(cfg.mu_f, mean_det(sp, k_bar, cfg.det_mode), sp.interface().length(), sp.h());
  else if (gamma.gamma_f > gamma.gamma_p && !cfg.allow_gamma_f_above_gamma_p)
    log::warn("gamma_f > gamma_p: outside the analysed regime, iterating anyway");
  hist.gamma = gamma;
  const auto coef = update_coefficients(gamma.gamma_f, gamma.gamma_p);

  if (cfg.diagnostics) {
    std::vector<TensorFn> fns;
    for (const auto& s : samples) fns.push_back(s.conductivity);
    std::vector<Vec2> pts = dense_y_grid(400);
    const auto& tr_pts = sp.porous_points();
    for (std::size_t i = 0; i < tr_pts.size(); i += 7) pts.push_back(tr_pts[i]);  // centroids
    res.stats = ensemble_stats(std::span<const TensorFn>(fns), cfg.phys.alpha, pts, sp.gamma_points());
    const auto chk = assumption_check(*res.stats);
    if (!chk.eta_ok || !chk.k_ok) {
      std::ostringstream os;
      os << "ensemble fluctuation assumptions violated (eta margin " << chk.eta_margin << ", k margin "
         << chk.k_margin << ")";
      log::warn(os.str());
    }
  }

  // shared operators, factorized once each
  StokesOperator stokes(spaces, cfg.phys.nu, gamma.gamma_f, std::move(eta_bar));
  DarcyOperator darcy(spaces, gamma.gamma_p, g, std::move(k_bar));
  const Factorization fs = Factorization::factorize(stokes.system());
  const Factorization fd = Factorization::factorize(darcy.system());

  const int ns = stokes.num_free(), nd = darcy.num_free();
  Eigen::MatrixXd s_static(ns, nj), d_static(nd, nj);
  Eigen::MatrixXd ux_dir(ng, nj), uy_dir(ng, nj);
  Eigen::MatrixXd head_dir(sp.nv_porous(), nj);
  parallel_for(nj, cfg.threads, [&](int j) {
    s_static.col(j) = stokes.static_rhs(samples[j]);
    d_static.col(j) = darcy.static_rhs(samples[j]);
    ux_dir.col(j) = stokes.dirichlet_on_gamma(samples[j], 0);
    uy_dir.col(j) = stokes.dirichlet_on_gamma(samples[j], 1);
    head_dir.col(j) = darcy.dirichlet_values(samples[j]);
  });

  Eigen::MatrixXd df = Eigen::MatrixXd::Zero(ng, nj), dp = Eigen::MatrixXd::Zero(ng, nj);
  for (std::size_t j = 0; j < opt.initial_traces.size(); ++j) {
    require(opt.initial_traces[j].delta_f.size() == ng && opt.initial_traces[j].delta_p.size() == ng,
            "ensemble_ddm_solve: initial trace length mismatch");
    df.col(j) = opt.initial_traces[j].delta_f;
    dp.col(j) = opt.initial_traces[j].delta_p;
  }
  df.row(0).setZero();
  df.row(ng - 1).setZero();
  dp.row(0).setZero();
  dp.row(ng - 1).setZero();

  Eigen::MatrixXd head = head_dir;  // phi^n, full
  Eigen::MatrixXd ux = ux_dir;      // u^n . tau on Gamma
  Eigen::MatrixXd xs(ns, nj), xd(nd, nj), xs_prev;
  Eigen::SparseMatrix<double> mass;
  if (cfg.record_velocity_increments) {
    mass = p1_mass(sp.fluid_elements(), sp.nv_fluid());
    xs_prev = Eigen::MatrixXd::Zero(ns, nj);
  }
  const auto& im = sp.interface();
  hist.sample_iterations.assign(nj, -1);
  hist.setup_ms = ms_since(t_start);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    auto t0 = Clock::now();
    parallel_for(nj, cfg.threads, [&](int j) {
      Eigen::VectorXd r = d_static.col(j);
      darcy.add_trace(r, dp.col(j));
      if (fluct[j]) darcy.add_correction(r, dk[j], head.col(j));
      xd.col(j) = r;
      fd.solve_in_place(xd.col(j));
      head.col(j) = darcy.expand(xd.col(j), head_dir.col(j));
    });
    hist.wall_ms_darcy.push_back(ms_since(t0));

    t0 = Clock::now();
    Eigen::MatrixXd uy(ng, nj);
    parallel_for(nj, cfg.threads, [&](int j) {
      Eigen::VectorXd r = s_static.col(j);
      stokes.add_trace(r, df.col(j));
      if (fluct[j]) stokes.add_tangential_correction(r, deta[j], ux.col(j));
      xs.col(j) = r;
      fs.solve_in_place(xs.col(j));
      ux.col(j) = stokes.interface_component(xs.col(j), ux_dir.col(j), 0);
      uy.col(j) = stokes.interface_component(xs.col(j), uy_dir.col(j), 1);
    });
    hist.wall_ms_stokes.push_back(ms_since(t0));

    std::vector<double> inc(nj), vinc;
    parallel_for(nj, cfg.threads, [&](int j) {
      Eigen::VectorXd un = -uy.col(j);
      Eigen::VectorXd ph(ng);
      for (int k = 0; k < ng; ++k) ph(k) = head(im.porous_nodes[k], j);
      zero_ends(un);
      zero_ends(ph);
      TracePair next = trace_update(df.col(j), dp.col(j), un, ph, coef, g);
      const double num = sp.trace_norm(next.delta_f - df.col(j)) + sp.trace_norm(next.delta_p - dp.col(j));
      const double den = sp.trace_norm(next.delta_f) + sp.trace_norm(next.delta_p) + cfg.floor;
      inc[j] = num / den;
      df.col(j) = next.delta_f;
      dp.col(j) = next.delta_p;
    });
    if (cfg.record_velocity_increments) {
      vinc.resize(nj);
      const int nv = sp.nv_fluid();
      for (int j = 0; j < nj; ++j) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(3 * nv);
        for (int i = 0; i < ns; ++i) d(stokes.free_dofs()[i]) = xs(i, j) - xs_prev(i, j);
        const Eigen::VectorXd dx = d.head(nv), dy = d.segment(nv, nv);
        vinc[j] = std::sqrt(std::max(0.0, dx.dot(mass * dx) + dy.dot(mass * dy)));
      }
      xs_prev = xs;
      hist.velocity_increments.push_back(std::move(vinc));
    }
    double worst = 0.0;
    for (int j = 0; j < nj; ++j) {
      if (hist.sample_iterations[j] < 0 && inc[j] < cfg.tol) hist.sample_iterations[j] = it;
      worst = std::max(worst, inc[j]);
    }
    hist.increments.push_back(std::move(inc));
    hist.iterations = it;
    if (!std::isfinite(worst)) {
      log::warn("ensemble DDM produced a non-finite trace increment, giving up");
      break;
    }
    if (worst < cfg.tol) {
      hist.converged = true;
      break;
    }
  }
  if (!hist.converged) {
    std::ostringstream os;
    os << "ensemble DDM did not reach tol " << cfg.tol << " in " << cfg.max_iter << " iterations";
    log::warn(os.str());
  }

  // bubbles and full fields
  if (!opt.sink) res.solutions.resize(nj);
  res.traces.resize(nj);
  std::vector<double> compat(nj, 0.0);
  parallel_for(nj, cfg.threads, [&](int j) {
    auto [u, p] = stokes.expand(xs.col(j), samples[j]);
    SolutionFields s{std::move(u), std::move(p), FieldVector{FieldKind::head, head.col(j)}};
    res.traces[j] = {df.col(j), dp.col(j)};
    compat[j] = compatibility_residual(sp, s, res.traces[j], gamma, g);
    if (opt.sink)
      opt.sink(j, std::move(s));
    else
      res.solutions[j] = std::move(s);
  });
  hist.compatibility_residual = *std::max_element(compat.begin(), compat.end());
  hist.factorizations = factorization_count() - fact0;
  hist.total_ms = ms_since(t_start);
  return res;
}

DdmResult traditional_ddm_solve(SpacesPtr spaces, const SampleProblem& sample, const DdmConfig& config,
                                const SolveOptions& options) {
  // a one-member ensemble: K_bar = K_j, eta_bar = eta_j, corrections vanish identically
  return ensemble_ddm_solve(std::move(spaces), std::span<const SampleProblem>(&sample, 1), config, options);
}

BatchResult traditional_ddm_batch(SpacesPtr spaces, std::span<const SampleProblem> samples, const DdmConfig& config,
                                  bool keep_solutions) {
  const auto t0 = Clock::now();
  BatchResult out;
  DdmConfig cfg = config;
  cfg.threads = 1;
  for (const auto& s : samples) {
    DdmResult r = traditional_ddm_solve(spaces, s, cfg);
    out.factorizations += r.history.factorizations;
    out.histories.push_back(std::move(r.history));
    if (keep_solutions) out.solutions.push_back(std::move(r.solutions.front()));
  }
  out.total_ms = ms_since(t0);
  return out;
}

double compatibility_residual(const FeSpaces& sp, const SolutionFields& s, const TracePair& t, RobinPair gamma,
                              double g) {
  const Eigen::VectorXd un = normal_trace(sp, s.velocity).values;
  const Eigen::VectorXd ph = head_trace(sp, s.head).values;
  const Eigen::VectorXd rf = t.delta_f - (gamma.gamma_f * un - g * ph);
  const Eigen::VectorXd rp = t.delta_p - (gamma.gamma_p * un + g * ph);
  const double den = sp.trace_norm(t.delta_f) + sp.trace_norm(t.delta_p);
  const double num = sp.trace_norm(rf) + sp.trace_norm(rp);
  return den > 0.0 ? num / den : num;
}

ContractionReport contraction_diagnostics(const IterationHistory& h, const EnsembleStats& st, const DdmConfig& cfg,
                                          double mesh_h) {
  ContractionReport rep;
  std::vector<double> worst;
  for (const auto& row : h.increments) worst.push_back(*std::max_element(row.begin(), row.end()));
  const int n = static_cast<int>(worst.size());
  const int tail = std::min(5, n - 1);
  if (tail >= 1 && worst[n - 1 - tail] > 0.0 && worst[n - 1] > 0.0)
    rep.observed_ratio = std::pow(worst[n - 1] / worst[n - 1 - tail], 1.0 / tail);

  const double gf = h.gamma.gamma_f, gp = h.gamma.gamma_p, g = cfg.phys.g, nu = cfg.phys.nu;
  const double r = gf / gp;
  const double eta_den = 2.0 * st.eta_mean_min - st.eta_fluct_max;
  const double k_den = (2.0 * st.k_mean_min - st.rho_max_all) - g * cfg.c_p * (1.0 / gf - 1.0 / gp);
  std::ostringstream note;
  if (eta_den > 0.0 && k_den > 0.0) {
    rep.e = std::max({2.0 * r * r / (1.0 + r * r), (1.0 + r * r) / 2.0, st.eta_fluct_max / eta_den,
                      st.rho_max_all / k_den});
  } else {
    note << "E inapplicable (denominator " << (eta_den > 0.0 ? k_den : eta_den) << " <= 0); ";
  }
  if (gf == gp) {
    const double base = 2.0 * nu + cfg.c_f * gf / (2.0 * nu) * std::sqrt(mesh_h);
    const double x = 2.0 * nu * mesh_h / (base * base);
    const double k_den_h = 2.0 * st.k_mean_min - st.rho_max_all;
    if (x < 1.0 && eta_den > 0.0 && k_den_h > 0.0)
      rep.e_h = std::max({1.0 - x / (1.0 - x), 1.0 - x, st.eta_fluct_max / eta_den, st.rho_max_all / k_den_h});
    else
      note << "E_h inapplicable; ";
  } else {
    note << "E_h defined for gamma_f = gamma_p only; ";
  }
  rep.note = note.str();
  return rep;
}

void write_history_csv(std::ostream& os, const IterationHistory& h) {
  os << "iter,sample,trace_increment,wall_ms_darcy,wall_ms_stokes\n";
  os.precision(10);
  for (std::size_t it = 0; it < h.increments.size(); ++it)
    for (std::size_t j = 0; j < h.increments[it].size(); ++j)
      os << it + 1 << ',' << j << ',' << h.increments[it][j] << ',' << h.wall_ms_darcy[it] << ','
         << h.wall_ms_stokes[it] << '\n';
}

}  // namespace edd

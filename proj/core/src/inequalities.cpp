#include "ricprobe/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "ricprobe/smoothing.hpp"
#include "ricprobe/transport.hpp"

namespace ricprobe {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "PASS";
    case Verdict::fail:
      return "FAIL";
    default:
      return "INCONCLUSIVE";
  }
}

Verdict classify_margin(double margin, double ci) {
  if (margin >= -2.0 * ci) return Verdict::pass;
  if (std::abs(margin) > 3.0 * ci) return Verdict::fail;
  return Verdict::inconclusive;
}

namespace {

McEstimate jack_to_mc(const JackEstimate& j, std::size_t n) {
  McEstimate e;
  e.value = j.value;
  e.ci = j.ci;
  e.n = n;
  return e;
}

SimConfig base_config(const Manifold& m, const Vec& x, const CheckConfig& cc) {
  SimConfig cfg;
  cfg.t_final = cc.t_final;
  cfg.n_steps = cc.n_steps;
  cfg.x0 = m.project(x);
  return cfg;
}

EnsembleOpts ensemble_opts(const CheckConfig& cc) {
  EnsembleOpts o;
  o.master_seed = cc.master_seed;
  o.n_paths = cc.n_paths;
  o.workers = cc.workers;
  o.n_batches = cc.n_batches;
  o.antithetic = cc.antithetic;
  return o;
}

int terminal_knot(const PathSample& p) { return p.n_knots - 1; }

void require_exponent(double p) {
  if (!(p >= 1.0 && p <= 2.0))
    throw std::invalid_argument("inequality exponent must lie in [1, 2]");
}

double xlogx(double v) {
  if (v > 0.0) return v * std::log(v);
  if (v == 0.0) return 0.0;
  throw std::runtime_error("conditional square went nonpositive; shift the functional");
}

// Coupled central differences of the mean of a path functional along the
// start frame, mirroring the semigroup finite-difference route.
struct MeanGradient {
  Vec comps;
  Vec component_ci;
  McEstimate norm;
};

MeanGradient fd_mean_gradient(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                              const CylindricFunction& F, double h) {
  if (!(h >= 1e-4 && h <= 1e-2))
    throw std::invalid_argument("fd_mean_gradient: h must lie in [1e-4, 1e-2]");
  const Vec x0 = m.project(cfg.x0);
  const Mat u0 = m.orthonormal_frame(x0);
  const int d = m.dim();

  std::vector<SimConfig> cfgs(2 * static_cast<std::size_t>(d), cfg);
  for (int a = 0; a < d; ++a) {
    cfgs[2 * a].x0 = m.project(m.exp(x0, h * u0.col(a)));
    cfgs[2 * a + 1].x0 = m.project(m.exp(x0, -h * u0.col(a)));
  }

  BatchTable table;
  auto res = run_coupled_ensemble(m, cfgs, opts, 2 * static_cast<std::size_t>(d), table,
                                  [&](std::size_t, std::span<const PathSample> ps, double* row) {
                                    for (std::size_t i = 0; i < ps.size(); ++i)
                                      row[i] += F.value(m, ps[i]);
                                  });

  MeanGradient out;
  out.comps = Vec(d);
  out.component_ci = Vec(d);
  for (int a = 0; a < d; ++a) {
    auto jk = jackknife(
        table, [a, h](const double* v) { return (v[2 * a] - v[2 * a + 1]) / (2.0 * h); });
    out.comps[a] = jk.value;
    out.component_ci[a] = jk.ci;
  }
  auto jn = jackknife(table, [d, h](const double* v) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      double c = (v[2 * a] - v[2 * a + 1]) / (2.0 * h);
      s += c * c;
    }
    return std::sqrt(s);
  });
  out.norm = jack_to_mc(jn, res.n_done);
  return out;
}

void fill_cross(InequalityReport& rep, double lhs_fd, double fd_ci) {
  rep.cross_gap = std::abs(lhs_fd - rep.lhs.value);
  rep.cross_tol = std::max(2.0 * (rep.lhs.ci + fd_ci),
                           0.05 * std::max(rep.lhs.value, lhs_fd));
  rep.cross_ok = rep.cross_gap <= rep.cross_tol;
}

}  // namespace

InequalityReport check_gradient_ineq_1(const Manifold& m, const Vec& x, const TestFunction& f,
                                       double p, const BoundFields& b, const CheckConfig& cc) {
  require_exponent(p);
  const SimConfig cfg = base_config(m, x, cc);
  const EnsembleOpts opts = ensemble_opts(cc);
  const int d = m.dim();
  const double dt = cfg.dt();

  BatchTable table;
  auto res = run_ensemble(m, cfg, opts, static_cast<std::size_t>(d) + 1, table,
                          [&](std::size_t, const PathSample& path, double* row) {
                            const int last = terminal_knot(path);
                            const Vec y = path.point(last);
                            const Vec comps =
                                m.frame_components(y, path.frame_at(last), f.gradient(m, y));
                            const Vec q = endpoint_damping(m, path, dt) * comps;
                            for (int a = 0; a < d; ++a) row[a] += q[a];
                            PathMu mu(m, path, b, dt);
                            row[d] += std::pow(1.0 + mu.total(), p) *
                                      std::pow(comps.norm(), p);
                          });

  auto phi_lhs = [d, p](const double* v) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += v[a] * v[a];
    return std::pow(s, 0.5 * p);
  };

  InequalityReport rep;
  rep.name = "semigroup-gradient-bound";
  rep.probe = cfg.x0;
  rep.lhs = jack_to_mc(jackknife(table, phi_lhs), res.n_done);
  rep.rhs = jack_to_mc(jackknife(table, [d](const double* v) { return v[d]; }), res.n_done);
  rep.margin = jack_to_mc(
      jackknife(table, [d, phi_lhs](const double* v) { return v[d] - phi_lhs(v); }),
      res.n_done);
  rep.verdict = classify_margin(rep.margin.value, rep.margin.ci);
  rep.params = {{"p", p}, {"T", cc.t_final}, {"n_paths", static_cast<double>(res.n_done)}};
  rep.note = "f = " + f.label;

  if (cc.fd_cross) {
    const auto fd = grad_pt_f_fd(m, cfg, opts, f, cc.fd_step);
    const double base = std::max(fd.norm.value, 0.0);
    const double lhs_fd = std::pow(base, p);
    const double fd_ci = p * std::pow(base + 1e-300, p - 1.0) * fd.norm.ci;
    fill_cross(rep, lhs_fd, fd_ci);
  }
  return rep;
}

InequalityReport check_gradient_ineq_2(const Manifold& m, const Vec& x, const TestFunction& f,
                                       double q, const BoundFields& b, const CheckConfig& cc) {
  require_exponent(q);
  const SimConfig cfg = base_config(m, x, cc);
  const EnsembleOpts opts = ensemble_opts(cc);
  const int d = m.dim();
  const double dt = cfg.dt();
  const Mat u0 = m.orthonormal_frame(cfg.x0);
  const Vec g0 = f.gradient(m, cfg.x0);
  const Vec g0c = m.frame_components(cfg.x0, u0, g0);
  const double half_pow = std::pow(2.0, -q);

  BatchTable table;
  auto res = run_ensemble(
      m, cfg, opts, static_cast<std::size_t>(d) + 1, table,
      [&](std::size_t, const PathSample& path, double* row) {
        const int last = terminal_knot(path);
        const Vec y = path.point(last);
        const Vec comps = m.frame_components(y, path.frame_at(last), f.gradient(m, y));
        const Vec qd = endpoint_damping(m, path, dt) * comps;
        for (int a = 0; a < d; ++a) row[a] += qd[a];
        PathMu mu(m, path, b, dt);
        const double mass = mu.total();
        const Vec diff = g0c - 0.5 * comps;
        row[d] += std::pow(1.0 + mass, q - 1.0) *
                  (std::pow(diff.norm(), q) + mass * half_pow * std::pow(comps.norm(), q));
      });

  auto phi_lhs = [d, q, g0c](const double* v) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      const double c = g0c[a] - 0.5 * v[a];
      s += c * c;
    }
    return std::pow(s, 0.5 * q);
  };

  InequalityReport rep;
  rep.name = "gradient-defect-bound";
  rep.probe = cfg.x0;
  rep.lhs = jack_to_mc(jackknife(table, phi_lhs), res.n_done);
  rep.rhs = jack_to_mc(jackknife(table, [d](const double* v) { return v[d]; }), res.n_done);
  rep.margin = jack_to_mc(
      jackknife(table, [d, phi_lhs](const double* v) { return v[d] - phi_lhs(v); }),
      res.n_done);
  rep.verdict = classify_margin(rep.margin.value, rep.margin.ci);
  rep.params = {{"q", q}, {"T", cc.t_final}, {"n_paths", static_cast<double>(res.n_done)}};
  rep.note = "f = " + f.label;

  if (cc.fd_cross) {
    const auto fd = grad_pt_f_fd(m, cfg, opts, f, cc.fd_step);
    const double base = (g0 - 0.5 * fd.value).norm();
    const double lhs_fd = std::pow(base, q);
    const double fd_ci =
        q * std::pow(base + 1e-300, q - 1.0) * 0.5 * fd.component_ci.norm();
    fill_cross(rep, lhs_fd, fd_ci);
  }
  return rep;
}

InequalityReport check_pathspace_gradient(const Manifold& m, const Vec& x,
                                          const CylindricFunction& F, double q,
                                          const BoundFields& b, const CheckConfig& cc) {
  require_exponent(q);
  if (F.has_cutoff())
    throw std::invalid_argument(
        "cutoff-carrying functionals belong to the truncated checks");
  if (F.last_knot() > cc.n_steps)
    throw std::invalid_argument("functional slot beyond the time grid");
  const SimConfig cfg = base_config(m, x, cc);
  const EnsembleOpts opts = ensemble_opts(cc);
  const int d = m.dim();
  const double dt = cfg.dt();

  BatchTable table;
  auto res = run_ensemble(m, cfg, opts, static_cast<std::size_t>(d) + 1, table,
                          [&](std::size_t, const PathSample& path, double* row) {
                            DampedDotTable dtab(m, F, path, dt);
                            const Vec& q0 = dtab.at(0);
                            for (int a = 0; a < d; ++a) row[a] += q0[a];
                            PathMu mu(m, path, b, dt);
                            row[d] += gradient_bound_integrand(m, F, path, mu, q);
                          });

  auto phi_lhs = [d, q](const double* v) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += v[a] * v[a];
    return std::pow(s, 0.5 * q);
  };

  InequalityReport rep;
  rep.name = "pathspace-gradient-bound";
  rep.probe = cfg.x0;
  rep.lhs = jack_to_mc(jackknife(table, phi_lhs), res.n_done);
  rep.rhs = jack_to_mc(jackknife(table, [d](const double* v) { return v[d]; }), res.n_done);
  rep.margin = jack_to_mc(
      jackknife(table, [d, phi_lhs](const double* v) { return v[d] - phi_lhs(v); }),
      res.n_done);
  rep.verdict = classify_margin(rep.margin.value, rep.margin.ci);
  rep.params = {{"q", q}, {"T", cc.t_final}, {"n_paths", static_cast<double>(res.n_done)}};
  rep.note = "slots = " + std::to_string(F.n_slots());

  if (cc.fd_cross) {
    const auto fd = fd_mean_gradient(m, cfg, opts, F, cc.fd_step);
    const double base = std::max(fd.norm.value, 0.0);
    const double lhs_fd = std::pow(base, q);
    const double fd_ci = q * std::pow(base + 1e-300, q - 1.0) * fd.norm.ci;
    fill_cross(rep, lhs_fd, fd_ci);
  }
  return rep;
}

namespace {

enum class CondRoute { terminal, outer_mean, oracle, nested };

const char* route_label(CondRoute r) {
  switch (r) {
    case CondRoute::terminal:
      return "exact-terminal";
    case CondRoute::outer_mean:
      return "outer-mean";
    case CondRoute::oracle:
      return "semigroup-oracle";
    default:
      return "nested";
  }
}

// The two integral displays share everything but the conditioned quantity and
// the prefactor: variance of the conditional mean against 2 * integral, or
// entropy gain of the conditional square against 4 * integral.
InequalityReport integral_core(const Manifold& m, const Vec& x, const CylindricFunction& F,
                               bool entropy, double t0, double t1, const BoundFields& b,
                               const CheckConfig& cc, const EntropyOpts& eo, bool truncated) {
  const SimConfig cfg = base_config(m, x, cc);
  const double dt = cfg.dt();
  const int last = cfg.n_steps;
  if (F.last_knot() > last) throw std::invalid_argument("functional slot beyond the time grid");
  if (truncated != F.has_cutoff())
    throw std::invalid_argument(truncated
                                    ? "truncated check needs a cutoff on the functional"
                                    : "cutoff-carrying functional belongs to the truncated checks");
  if (eo.quad_intervals < 7)
    throw std::invalid_argument("quad_intervals must give at least eight trapezoid nodes");
  if (eo.f_squared && eo.f_squared->has_cutoff())
    throw std::invalid_argument("f_squared must not carry a cutoff");

  auto to_knot = [&](double t, const char* what) {
    const double k = t / dt;
    const long r = std::lround(k);
    if (std::abs(k - static_cast<double>(r)) > 1e-9 || r < 0 || r > last)
      throw std::invalid_argument(std::string(what) + " must sit on the time grid");
    return static_cast<int>(r);
  };
  const int k0 = to_knot(t0, "t0");
  const int k1 = to_knot(t1, entropy ? "t1" : "t");
  if (k0 > k1) throw std::invalid_argument("t0 must not exceed t1");

  InequalityReport rep;
  rep.name = std::string(truncated ? "truncated-" : "") + (entropy ? "log-sobolev" : "poincare");
  rep.probe = cfg.x0;
  rep.params = {{"T", cc.t_final}, {"n_paths", static_cast<double>(cc.n_paths)}};
  if (entropy) {
    rep.params["t0"] = t0;
    rep.params["t1"] = t1;
  } else {
    rep.params["t"] = t1;
  }

  if (k0 == k1) {
    rep.verdict = Verdict::pass;
    rep.note = "zero-length window, both sides vanish";
    return rep;
  }

  const int n_ref = 2 * eo.quad_intervals;
  if ((k1 - k0) % n_ref != 0)
    throw std::invalid_argument("window must split into 2 x quad_intervals grid steps");
  const int node_step = (k1 - k0) / n_ref;
  const int n_nodes = n_ref + 1;

  auto pick = [&](int k, bool squared) {
    if (k >= F.last_knot()) return CondRoute::terminal;
    if (k == 0) return CondRoute::outer_mean;
    if (F.has_cutoff()) return CondRoute::nested;
    if (!squared && eo.semigroup) return CondRoute::oracle;
    if (squared && eo.f_squared && eo.semigroup_sq) return CondRoute::oracle;
    return CondRoute::nested;
  };
  const CondRoute route1 = pick(k1, entropy);
  const CondRoute route0 = entropy ? pick(k0, true) : CondRoute::outer_mean;
  if (route1 == CondRoute::nested || (entropy && route0 == CondRoute::nested))
    check_nested_budget(cc.n_paths, eo.n_inner);
  rep.note = std::string("conditioning: ") + route_label(route1);
  if (entropy) rep.note += std::string(", base ") + route_label(route0);
  if (route1 == CondRoute::nested || (entropy && route0 == CondRoute::nested))
    rep.params["n_inner"] = static_cast<double>(eo.n_inner);

  const int col_c = n_nodes;      // conditional column
  const int col_f = n_nodes + 1;  // companion column (F, or the base entropy term)
  const int col_exit = n_nodes + 2;
  const std::size_t width = static_cast<std::size_t>(n_nodes) + 2 + (truncated ? 1 : 0);

  std::mutex band_mu;
  double band_max = 0.0;
  const double slope_cap =
      truncated ? c3_step_deriv(0.5) / (F.cutoff().r_out - F.cutoff().r_in) : 0.0;

  auto cond_at = [&](int k, CondRoute route, const PathSample& path, uint64_t key,
                     PathSample& scratch, bool squared) {
    if (route == CondRoute::oracle) {
      ConditionalOpts co;
      if (squared) {
        co.semigroup = eo.semigroup_sq;
        return conditional_expectation(m, cfg, *eo.f_squared, path, key, k, co, scratch);
      }
      co.semigroup = eo.semigroup;
      return conditional_expectation(m, cfg, F, path, key, k, co, scratch);
    }
    ConditionalOpts co;
    co.n_inner = eo.n_inner;
    if (squared) co.transform = [](double v) { return v * v; };
    return conditional_expectation(m, cfg, F, path, key, k, co, scratch);
  };

  BatchTable table;
  const EnsembleOpts opts = ensemble_opts(cc);
  auto res = run_ensemble(
      m, cfg, opts, width, table, [&](std::size_t idx, const PathSample& path, double* row) {
        static thread_local PathSample scratch;
        PathMu mu(m, path, b, dt);
        for (int i = 0; i < n_nodes; ++i)
          row[i] += energy_integrand(m, F, path, mu, k0 + i * node_step);

        const double fval = F.value(m, path);
        if (eo.f_squared) {
          const double fsq = eo.f_squared->value(m, path);
          if (std::abs(fsq - fval * fval) > 1e-8 * (1.0 + fval * fval))
            throw std::runtime_error("f_squared does not match the square of F");
        }
        const uint64_t key = path_stream_key(cc.master_seed, idx);

        if (!entropy) {
          const double c = route1 == CondRoute::terminal
                               ? fval
                               : cond_at(k1, route1, path, key, scratch, false);
          row[col_c] += c * c;
          row[col_f] += fval;
        } else {
          row[col_c] += route1 == CondRoute::terminal
                            ? xlogx(fval * fval)
                            : xlogx(cond_at(k1, route1, path, key, scratch, true));
          if (route0 == CondRoute::outer_mean)
            row[col_f] += fval * fval;
          else
            row[col_f] += route0 == CondRoute::terminal
                              ? xlogx(fval * fval)
                              : xlogx(cond_at(k0, route0, path, key, scratch, true));
        }

        if (truncated) {
          const CutoffInfo info = F.cutoff_info(m, path);
          if (info.value < 1.0) {
            row[col_exit] += 1.0;
            double dsum = 0.0;
            for (int i = 0; i < F.n_slots(); ++i) {
              const int kk = F.slot(i).knot;
              dsum += m.frame_components(path.point(kk), path.frame_at(kk),
                                         F.slot_gradient(m, path, i))
                          .norm();
            }
            const double bphi = std::abs(F.core_value(m, path)) * slope_cap;
            const double tot = 1.0 + mu.total();
            const double cand = tot * (bphi + dsum);
            std::lock_guard<std::mutex> lk(band_mu);
            band_max = std::max(band_max, cand * cand);
          }
        }
      });

  const double h = node_step * dt;
  std::vector<double> w(n_nodes, h);
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  const double factor = entropy ? 4.0 : 2.0;
  auto phi_rhs = [w, factor, n_nodes](const double* v) {
    double s = 0.0;
    for (int i = 0; i < n_nodes; ++i) s += w[i] * v[i];
    return factor * s;
  };
  auto phi_lhs = [entropy, col_c, col_f, route0](const double* v) {
    if (!entropy) return v[col_c] - v[col_f] * v[col_f];
    const double base = route0 == CondRoute::outer_mean ? xlogx(v[col_f]) : v[col_f];
    return v[col_c] - base;
  };

  rep.lhs = jack_to_mc(jackknife(table, phi_lhs), res.n_done);
  rep.rhs = jack_to_mc(jackknife(table, phi_rhs), res.n_done);
  rep.margin = jack_to_mc(
      jackknife(table,
                [phi_rhs, phi_lhs](const double* v) { return phi_rhs(v) - phi_lhs(v); }),
      res.n_done);

  const auto means = table.means();
  double base_trap = 0.0;
  for (int i = 0; i <= n_ref; i += 2) {
    const double wb = (i == 0 || i == n_ref) ? h : 2.0 * h;
    base_trap += wb * means[i];
  }
  rep.quad_gap = std::abs(factor * base_trap - phi_rhs(means.data()));

  double band = 0.0;
  if (truncated) {
    rep.exit_fraction = means[col_exit];
    if (rep.exit_fraction > 1e-3)
      throw std::runtime_error(
          "cutoff ramp reached by too many paths; widen r_in or shorten the horizon");
    band = factor * (t1 - t0) * rep.exit_fraction * band_max;
    rep.correction_band = band;
  }
  rep.verdict = classify_margin(rep.margin.value, rep.margin.ci + band);
  return rep;
}

}  // namespace

InequalityReport check_logsobolev(const Manifold& m, const Vec& x, const CylindricFunction& F,
                                  double t0, double t1, const BoundFields& b,
                                  const CheckConfig& cc, const EntropyOpts& eo) {
  return integral_core(m, x, F, true, t0, t1, b, cc, eo, false);
}

InequalityReport check_poincare(const Manifold& m, const Vec& x, const CylindricFunction& F,
                                double t, const BoundFields& b, const CheckConfig& cc,
                                const EntropyOpts& eo) {
  return integral_core(m, x, F, false, 0.0, t, b, cc, eo, false);
}

InequalityReport check_truncated(const Manifold& m, const Vec& x, const CylindricFunction& F,
                                 TruncatedMode mode, double t0, double t1,
                                 const BoundFields& b, const CheckConfig& cc,
                                 const EntropyOpts& eo) {
  if (!F.has_cutoff())
    throw std::invalid_argument("truncated check needs a cutoff on the functional");
  if (mode == TruncatedMode::poincare && t0 != 0.0)
    throw std::invalid_argument("poincare mode conditions at t1 and needs t0 = 0");
  return integral_core(m, x, F, mode == TruncatedMode::logsobolev, t0, t1, b, cc, eo, true);
}

}  // namespace ricprobe

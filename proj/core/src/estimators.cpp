#include "ricprobe/estimators.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace ricprobe {

namespace {

int terminal_knot(const PathSample& p) { return p.n_knots - 1; }

McEstimate jack_to_mc(const JackEstimate& j, std::size_t n) {
  McEstimate e;
  e.value = j.value;
  e.ci = j.ci;
  e.n = n;
  return e;
}

}  // namespace

McEstimate pt_f(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                const TestFunction& f) {
  BatchTable table;
  auto res = run_ensemble(m, cfg, opts, 1, table,
                          [&](std::size_t, const PathSample& p, double* row) {
                            row[0] += f(p.point(terminal_knot(p)));
                          });
  auto jk = jackknife(table, [](const double* v) { return v[0]; });
  return jack_to_mc(jk, res.n_done);
}

GradientEstimate grad_pt_f_bismut(const Manifold& m, const SimConfig& cfg,
                                  const EnsembleOpts& opts, const TestFunction& f) {
  const Vec x0 = m.project(cfg.x0);
  const Mat u0 = m.orthonormal_frame(x0);
  const int d = m.dim();
  const double dt = cfg.dt();

  BatchTable table;
  auto res = run_ensemble(m, cfg, opts, static_cast<std::size_t>(d), table,
                          [&](std::size_t, const PathSample& p, double* row) {
                            const int n = terminal_knot(p);
                            Vec g = m.frame_components(p.point(n), p.frame_at(n),
                                                       f.gradient(m, p.point(n)));
                            Vec q = endpoint_damping(m, p, dt) * g;
                            for (int a = 0; a < d; ++a) row[a] += q[a];
                          });

  GradientEstimate out;
  Vec comps(d);
  out.component_ci = Vec(d);
  for (int a = 0; a < d; ++a) {
    auto jk = jackknife(table, [a](const double* v) { return v[a]; });
    comps[a] = jk.value;
    out.component_ci[a] = jk.ci;
  }
  auto jn = jackknife(table, [d](const double* v) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += v[a] * v[a];
    return std::sqrt(s);
  });
  out.value = u0 * comps;
  out.norm = jack_to_mc(jn, res.n_done);
  out.runs = res;
  return out;
}

GradientEstimate grad_pt_f_fd(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                              const TestFunction& f, double h) {
  if (!(h >= 1e-4 && h <= 1e-2))
    throw std::invalid_argument("grad_pt_f_fd: h must lie in [1e-4, 1e-2]");
  const Vec x0 = m.project(cfg.x0);
  const Mat u0 = m.orthonormal_frame(x0);
  const int d = m.dim();

  std::vector<SimConfig> cfgs(2 * static_cast<std::size_t>(d), cfg);
  for (int a = 0; a < d; ++a) {
    cfgs[2 * a].x0 = m.project(m.exp(x0, h * u0.col(a)));
    cfgs[2 * a + 1].x0 = m.project(m.exp(x0, -h * u0.col(a)));
  }

  BatchTable table;
  auto res = run_coupled_ensemble(
      m, cfgs, opts, 2 * static_cast<std::size_t>(d), table,
      [&](std::size_t, std::span<const PathSample> ps, double* row) {
        for (std::size_t i = 0; i < ps.size(); ++i)
          row[i] += f(ps[i].point(terminal_knot(ps[i])));
      });

  GradientEstimate out;
  Vec comps(d);
  out.component_ci = Vec(d);
  for (int a = 0; a < d; ++a) {
    auto jk = jackknife(
        table, [a, h](const double* v) { return (v[2 * a] - v[2 * a + 1]) / (2.0 * h); });
    comps[a] = jk.value;
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
  out.value = u0 * comps;
  out.norm = jack_to_mc(jn, res.n_done);
  out.runs = res;
  return out;
}

void check_nested_budget(std::size_t n_outer, int n_inner) {
  if (static_cast<double>(n_outer) * n_inner > kNestedBudgetCap)
    throw std::invalid_argument("nested budget exceeded: outer * inner > 1e7");
}

double conditional_expectation(const Manifold& m, const SimConfig& cfg,
                               const CylindricFunction& F, const PathSample& base,
                               uint64_t path_key, int t_knot, const ConditionalOpts& opts,
                               PathSample& scratch) {
  if (t_knot < 0 || t_knot >= base.n_knots)
    throw std::invalid_argument("conditional_expectation: knot outside the grid");
  if (t_knot >= F.last_knot()) {
    double v = F.value(m, base);
    return opts.transform ? opts.transform(v) : v;
  }
  if (opts.semigroup) {
    if (opts.transform) throw std::invalid_argument("semigroup oracle cannot carry a transform");
    if (F.has_cutoff() || F.mode() != CylindricFunction::Mode::sum)
      throw std::invalid_argument("semigroup oracle needs a plain sum-mode functional");
    double v = F.shift();
    for (int i = 0; i < F.n_slots(); ++i) {
      const CylinderSlot& slot = F.slot(i);
      if (slot.knot <= t_knot) {
        v += slot.coeff * slot.f(base.point(slot.knot));
      } else {
        const double s = (slot.knot - t_knot) * cfg.dt();
        v += slot.coeff * opts.semigroup(s, base.point(t_knot));
      }
    }
    return v;
  }
  if (opts.n_inner < 1) throw std::invalid_argument("n_inner must be positive");

  double acc = 0.0;
  int n_ok = 0;
  for (int r = 0; r < opts.n_inner; ++r) {
    scratch = base;
    NormalStream child(child_stream_key(path_key, static_cast<uint64_t>(t_knot),
                                        static_cast<uint64_t>(r)));
    simulate_continuation(m, cfg, t_knot, child, scratch);
    if (!scratch.ok) continue;
    double v = F.value(m, scratch);
    acc += opts.transform ? opts.transform(v) : v;
    ++n_ok;
  }
  if (n_ok * 2 < opts.n_inner)
    throw std::runtime_error("conditional_expectation: most tail redraws unusable");
  return acc / n_ok;
}

std::vector<double> horizon_schedule(double t_max, int count) {
  if (!(t_max > 0.0) || count < 1) throw std::invalid_argument("bad horizon schedule");
  std::vector<double> t(count);
  for (int j = 0; j < count; ++j) t[j] = t_max * std::pow(2.0, -j);
  return t;
}

LimitFit short_time_limit(LimitModel model, std::vector<double> horizon,
                          std::vector<McEstimate> value) {
  if (horizon.size() != value.size() || horizon.size() < 4)
    throw std::invalid_argument("short_time_limit: need at least four schedule points");
  std::vector<double> x(horizon.size());
  std::vector<double> y(horizon.size());
  std::vector<double> w(horizon.size());
  for (std::size_t i = 0; i < horizon.size(); ++i) {
    x[i] = model == LimitModel::affine_t ? horizon[i] : std::sqrt(horizon[i]);
    y[i] = value[i].value;
    // Floor keeps deterministic integrands (exact zero interval) fittable.
    w[i] = std::max(value[i].ci, 1e-9 * (1.0 + std::abs(value[i].value)));
  }
  LimitFit out;
  out.model = model;
  out.horizon = std::move(horizon);
  out.value = std::move(value);
  out.fit = fit_affine(x, y, w);
  return out;
}

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

// Weighted quadratic fit intercept, for sizing what the affine model leaves
// on the table.
double quadratic_intercept(const LimitFit& lf) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < lf.horizon.size(); ++i) {
    const double x =
        lf.model == LimitModel::affine_t ? lf.horizon[i] : std::sqrt(lf.horizon[i]);
    const double sd =
        std::max(lf.value[i].ci, 1e-9 * (1.0 + std::abs(lf.value[i].value))) / kZ95;
    const double w = 1.0 / (sd * sd);
    Eigen::Vector3d row(1.0, x, x * x);
    a += w * row * row.transpose();
    b += w * lf.value[i].value * row;
  }
  return a.ldlt().solve(b)[0];
}

CurvatureReport curvature_core(const Manifold& m, const Vec& probe, const TestFunction& f,
                               const CurvatureOpts& opts, bool boundary) {
  CurvatureReport rep;
  rep.cert = certify_probe_function(m, f, probe);
  if (!rep.cert.ok)
    throw std::invalid_argument("probe function fails certification at the probe point");
  rep.probe = m.project(probe);
  rep.direction = f.gradient(m, rep.probe);

  const int d = m.dim();
  const std::size_t width = 4 + static_cast<std::size_t>(d);
  std::vector<double> horizon = horizon_schedule(opts.t_max, opts.n_horizons);
  std::vector<McEstimate> v_p1;
  std::vector<McEstimate> v_p2;
  std::vector<McEstimate> v_var;

  for (std::size_t j = 0; j < horizon.size(); ++j) {
    const double t = horizon[j];
    SimConfig cfg;
    cfg.t_final = t;
    cfg.n_steps = opts.n_steps;
    cfg.x0 = rep.probe;
    const double dt = cfg.dt();

    EnsembleOpts eo;
    eo.master_seed = derive_stream_key(opts.master_seed, j);
    eo.n_paths = opts.n_paths;
    eo.workers = opts.workers;
    eo.n_batches = opts.n_batches;
    eo.antithetic = opts.antithetic;

    BatchTable table;
    auto res = run_ensemble(m, cfg, eo, width, table,
                            [&](std::size_t, const PathSample& p, double* row) {
                              const int n = terminal_knot(p);
                              const Vec y = p.point(n);
                              const double fv = f(y);
                              const Vec grad = f.gradient(m, y);
                              const double gn2 = grad.squaredNorm();
                              row[0] += fv;
                              row[1] += fv * fv;
                              row[2] += std::sqrt(gn2);
                              row[3] += gn2;
                              Vec q = endpoint_damping(m, p, dt) *
                                      m.frame_components(y, p.frame_at(n), grad);
                              for (int a = 0; a < d; ++a) row[4 + a] += q[a];
                            });

    auto grad_norm = [d](const double* v) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += v[4 + a] * v[4 + a];
      return std::sqrt(s);
    };
    auto phi_p1 = [&](const double* v) {
      double diff = v[2] - grad_norm(v);
      return boundary ? kSqrtPi / (2.0 * std::sqrt(t)) * diff : diff / t;
    };
    auto phi_p2 = [&](const double* v) {
      double gp = grad_norm(v);
      double diff = v[3] - gp * gp;
      return boundary ? kSqrtPi / (4.0 * std::sqrt(t)) * diff : diff / (2.0 * t);
    };
    auto phi_var = [&](const double* v) {
      double gp = grad_norm(v);
      double inner = (v[1] - v[0] * v[0]) / (2.0 * t) - gp * gp;
      return boundary ? 3.0 * kSqrtPi / (8.0 * std::sqrt(t)) * inner : inner / t;
    };
    v_p1.push_back(jack_to_mc(jackknife(table, phi_p1), res.n_done));
    v_p2.push_back(jack_to_mc(jackknife(table, phi_p2), res.n_done));
    v_var.push_back(jack_to_mc(jackknife(table, phi_var), res.n_done));
  }

  const LimitModel model = boundary ? LimitModel::affine_sqrt_t : LimitModel::affine_t;
  auto track = [&](std::string method, std::vector<McEstimate> v) {
    FormTrack ft;
    ft.method = std::move(method);
    ft.fit = short_time_limit(model, horizon, std::move(v));
    ft.truncation_shift = std::abs(quadratic_intercept(ft.fit) - ft.fit.fit.intercept);
    return ft;
  };
  rep.grad_p1 = track("gradient-form p=1", std::move(v_p1));
  rep.grad_p2 = track("gradient-form p=2", std::move(v_p2));
  rep.variance = track("variance-form", std::move(v_var));
  rep.value = rep.grad_p2.fit.fit.intercept;
  rep.ci = rep.grad_p2.fit.fit.intercept_ci;

  auto consistent = [&](const FormTrack& a, const FormTrack& b) {
    const AffineFit& fa = a.fit.fit;
    const AffineFit& fb = b.fit.fit;
    double tol =
        3.0 * std::sqrt(fa.intercept_ci * fa.intercept_ci + fb.intercept_ci * fb.intercept_ci) +
        a.truncation_shift + b.truncation_shift;
    return std::abs(fa.intercept - fb.intercept) <= tol;
  };
  rep.forms_consistent = consistent(rep.grad_p2, rep.grad_p1) &&
                         consistent(rep.grad_p2, rep.variance);
  return rep;
}

}  // namespace

CurvatureReport ricci_estimate(const Manifold& m, const Vec& probe, const TestFunction& f,
                               const CurvatureOpts& opts) {
  return curvature_core(m, probe, f, opts, false);
}

CurvatureReport second_form_estimate(const Manifold& m, const Vec& probe, const TestFunction& f,
                                     const CurvatureOpts& opts) {
  auto info = m.boundary(m.project(probe));
  if (std::abs(info.dist) > 1e-9)
    throw std::invalid_argument("second_form_estimate: probe must sit on the boundary");
  return curvature_core(m, probe, f, opts, true);
}

McEstimate local_time_mean(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts) {
  BatchTable table;
  auto res = run_ensemble(m, cfg, opts, 1, table,
                          [](std::size_t, const PathSample& p, double* row) {
                            row[0] += p.local_time;
                          });
  return jack_to_mc(jackknife(table, [](const double* v) { return v[0]; }), res.n_done);
}

namespace {

// Per-horizon mean measure mass, reused by both mu laws.
std::vector<McEstimate> mu_mass_schedule(const Manifold& m, const Vec& probe,
                                         const BoundFields& b, const CurvatureOpts& opts,
                                         const std::vector<double>& horizon) {
  std::vector<McEstimate> mass;
  for (std::size_t j = 0; j < horizon.size(); ++j) {
    SimConfig cfg;
    cfg.t_final = horizon[j];
    cfg.n_steps = opts.n_steps;
    cfg.x0 = m.project(probe);
    const double dt = cfg.dt();

    EnsembleOpts eo;
    eo.master_seed = derive_stream_key(opts.master_seed, j);
    eo.n_paths = opts.n_paths;
    eo.workers = opts.workers;
    eo.n_batches = opts.n_batches;
    eo.antithetic = opts.antithetic;

    BatchTable table;
    auto res = run_ensemble(m, cfg, eo, 1, table,
                            [&](std::size_t, const PathSample& p, double* row) {
                              row[0] += PathMu(m, p, b, dt).total();
                            });
    mass.push_back(
        jack_to_mc(jackknife(table, [](const double* v) { return v[0]; }), res.n_done));
  }
  return mass;
}

}  // namespace

MuLimits mu_sqrt_limits(const Manifold& m, const Vec& probe, const BoundFields& b,
                        const CurvatureOpts& opts) {
  std::vector<double> horizon = horizon_schedule(opts.t_max, opts.n_horizons);
  auto mass = mu_mass_schedule(m, probe, b, opts, horizon);
  std::vector<McEstimate> first(mass.size());
  std::vector<McEstimate> second(mass.size());
  for (std::size_t j = 0; j < mass.size(); ++j) {
    const double rt = std::sqrt(horizon[j]);
    first[j] = {mass[j].value / rt, mass[j].ci / rt, mass[j].n, 0.0};
    // Delta-method interval for the squared mean.
    second[j] = {mass[j].value * mass[j].value / rt,
                 2.0 * std::abs(mass[j].value) * mass[j].ci / rt, mass[j].n, 0.0};
  }
  MuLimits out;
  out.mean_over_sqrt = short_time_limit(LimitModel::affine_sqrt_t, horizon, std::move(first));
  out.mean_sq_over_sqrt =
      short_time_limit(LimitModel::affine_sqrt_t, std::move(horizon), std::move(second));
  return out;
}

LimitFit mu_interior_limit(const Manifold& m, const Vec& probe, const BoundFields& b,
                           const CurvatureOpts& opts) {
  std::vector<double> horizon = horizon_schedule(opts.t_max, opts.n_horizons);
  auto mass = mu_mass_schedule(m, probe, b, opts, horizon);
  std::vector<McEstimate> scaled(mass.size());
  for (std::size_t j = 0; j < mass.size(); ++j)
    scaled[j] = {mass[j].value / horizon[j], mass[j].ci / horizon[j], mass[j].n, 0.0};
  return short_time_limit(LimitModel::affine_t, std::move(horizon), std::move(scaled));
}

ExpMomentReport exp_moment_diagnostic(const Manifold& m, const SimConfig& cfg,
                                      const EnsembleOpts& opts, const BoundFields& b,
                                      double eps) {
  const double dt = cfg.dt();
  const double power = 2.0 + eps;
  BatchTable table;
  auto res = run_ensemble(m, cfg, opts, 1, table,
                          [&](std::size_t, const PathSample& p, double* row) {
                            PathMu mu(m, p, b, dt);
                            row[0] += std::exp(power * mu.prefix(mu.n_knots() - 1));
                          });
  ExpMomentReport out;
  out.moment = jack_to_mc(jackknife(table, [](const double* v) { return v[0]; }), res.n_done);
  out.heavy_tail = out.moment.ci > 0.5 * out.moment.value;
  return out;
}

IsometryReport martingale_isometry(const Sphere& m, const Vec& x0, const Vec& a,
                                   const IsometryOpts& opts) {
  const int d = m.dim();
  const double rate = static_cast<double>(d);
  const double T = opts.t_final;
  SimConfig cfg;
  cfg.t_final = T;
  cfg.n_steps = opts.n_steps;
  cfg.x0 = m.project(x0);
  const double dt = cfg.dt();
  TestFunction f = TestFunction::linear(a);

  if (opts.eps.empty()) throw std::invalid_argument("martingale_isometry: no eps values");
  std::vector<int> ek(opts.eps.size());
  for (std::size_t i = 0; i < opts.eps.size(); ++i) {
    double raw = opts.eps[i] / dt;
    ek[i] = static_cast<int>(std::lround(raw));
    if (ek[i] < 1 || ek[i] > cfg.n_steps || std::abs(raw - ek[i]) > 1e-9)
      throw std::invalid_argument("martingale_isometry: eps must be a grid multiple");
    if (i > 0 && ek[i] <= ek[i - 1])
      throw std::invalid_argument("martingale_isometry: eps must increase");
  }

  // Primitives per eps: conditional mean squared, exact energy integral,
  // plain energy integral; then the damped gradient components.
  const std::size_t per_eps = 3;
  const std::size_t width = per_eps * ek.size() + static_cast<std::size_t>(d);

  EnsembleOpts eo;
  eo.master_seed = opts.master_seed;
  eo.n_paths = opts.n_paths;
  eo.workers = opts.workers;
  eo.n_batches = opts.n_batches;

  BatchTable table;
  auto res = run_ensemble(
      m, cfg, eo, width, table,
      [&](std::size_t, const PathSample& p, double* row) {
        static thread_local std::vector<Mat> damp;
        const int n = terminal_knot(p);
        backward_damping(m, p, dt, n, damp);
        const Vec gT = m.frame_components(p.point(n), p.frame_at(n),
                                          f.gradient(m, p.point(n)));
        const int kmax = ek.back();
        // Trapezoid prefixes of both integrands up to the largest eps.
        double acc_exact = 0.0;
        double acc_plain = 0.0;
        std::size_t next = 0;
        auto exact_at = [&](int k) {
          double s = k * dt;
          double gn2 = f.gradient(m, p.point(k)).squaredNorm();
          return std::exp(-2.0 * rate * (T - s)) * gn2;
        };
        auto plain_at = [&](int k) { return (damp[k] * gT).squaredNorm(); };
        double prev_e = exact_at(0);
        double prev_p = plain_at(0);
        for (int k = 1; k <= kmax; ++k) {
          double cur_e = exact_at(k);
          double cur_p = plain_at(k);
          acc_exact += 0.5 * dt * (prev_e + cur_e);
          acc_plain += 0.5 * dt * (prev_p + cur_p);
          prev_e = cur_e;
          prev_p = cur_p;
          while (next < ek.size() && ek[next] == k) {
            double fe = f(p.point(k));
            row[per_eps * next + 0] += fe * fe;
            row[per_eps * next + 1] += acc_exact;
            row[per_eps * next + 2] += acc_plain;
            ++next;
          }
        }
        for (int c = 0; c < d; ++c) row[per_eps * ek.size() + c] += (damp[0] * gT)[c];
      });

  const double ptf = std::exp(-rate * T) * f(cfg.x0);
  const double pt2 = ptf * ptf;
  IsometryReport rep;
  for (std::size_t i = 0; i < ek.size(); ++i) {
    const double eps = ek[i] * dt;
    const double shrink = std::exp(-2.0 * rate * (T - eps));
    auto phi_lhs = [&, i](const double* v) { return shrink * v[per_eps * i] - pt2; };
    auto phi_rhs = [&, i](const double* v) { return 2.0 * v[per_eps * i + 1]; };
    auto phi_plain = [&, i](const double* v) { return 2.0 * v[per_eps * i + 2]; };
    auto phi_gap = [&, i](const double* v) { return phi_lhs(v) - phi_rhs(v); };
    auto phi_half = [&](const double* v) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        double q = v[per_eps * ek.size() + c];
        s += q * q;
      }
      return 0.5 * s;
    };
    IsometryPoint pt;
    pt.eps = eps;
    pt.lhs = jack_to_mc(jackknife(table, phi_lhs), res.n_done);
    pt.rhs = jack_to_mc(jackknife(table, phi_rhs), res.n_done);
    pt.rhs_plain = jack_to_mc(jackknife(table, phi_plain), res.n_done);
    pt.gap = jack_to_mc(jackknife(table, phi_gap), res.n_done);
    pt.normalized = {pt.lhs.value / (4.0 * eps), pt.lhs.ci / (4.0 * eps), pt.lhs.n, 0.0};
    pt.half_grad_sq = jack_to_mc(jackknife(table, phi_half), res.n_done);
    pt.within_ci = std::abs(pt.gap.value) <= pt.gap.ci;
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

}  // namespace ricprobe

#include "ricprobe/pathspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ricprobe/smoothing.hpp"

namespace ricprobe {

BoundFields BoundFields::constant(double k, double s) {
  BoundFields b;
  b.curvature = [k](const Vec&) { return k; };
  b.bending = [s](const Vec&) { return s; };
  return b;
}

PathMu::PathMu(const Manifold& m, const PathSample& path, const BoundFields& b, double dt) {
  (void)m;
  const int n = path.n_knots;
  prefix_.assign(n, 0.0);
  cum_.assign(n, 0.0);
  for (int k = 0; k + 1 < n; ++k) {
    double da = 0.0;
    if (b.curvature) {
      const double kv = b.curvature(path.point(k));
      if (kv < 0.0) throw std::invalid_argument("PathMu: negative curvature bound");
      da += kv * dt;
    }
    const double dl = path.push[k + 1];
    if (dl > 0.0 && b.bending) {
      const double sv = b.bending(path.point(k + 1));
      if (sv < 0.0) throw std::invalid_argument("PathMu: negative bending bound");
      da += sv * dl;
    }
    prefix_[k + 1] = prefix_[k] + da;
    cum_[k + 1] = cum_[k] + std::exp(prefix_[k]) * da;
  }
}

double PathMu::mass_closed(int a, int b) const {
  return std::exp(prefix_[b]) - std::exp(prefix_[a]);
}

double PathMu::closed_form_gap() const {
  double gap = 0.0;
  for (std::size_t k = 0; k < cum_.size(); ++k)
    gap = std::max(gap, std::abs(cum_[k] - (std::exp(prefix_[k]) - 1.0)));
  return gap;
}

CylindricFunction::CylindricFunction(Mode mode, std::vector<CylinderSlot> slots, double shift)
    : mode_(mode), slots_(std::move(slots)), shift_(shift) {
  if (slots_.empty() || slots_.size() > 3)
    throw std::invalid_argument("CylindricFunction: between 1 and 3 slots");
  int prev = 0;
  for (const auto& s : slots_) {
    if (s.knot <= prev)
      throw std::invalid_argument("CylindricFunction: slot knots must increase and be >= 1");
    prev = s.knot;
  }
}

CylindricFunction CylindricFunction::terminal(int knot, TestFunction f, double coeff,
                                              double shift) {
  return CylindricFunction(Mode::sum, {{knot, coeff, std::move(f)}}, shift);
}

void CylindricFunction::set_cutoff(SupCutoff c) {
  if (!(c.r_in > 0.0) || !(c.r_out > c.r_in))
    throw std::invalid_argument("CylindricFunction: cutoff needs 0 < r_in < r_out");
  cutoff_ = std::move(c);
}

double CylindricFunction::core_value(const Manifold& m, const PathSample& path) const {
  (void)m;
  if (mode_ == Mode::sum) {
    double v = shift_;
    for (const auto& s : slots_) v += s.coeff * s.f(path.point(s.knot));
    return v;
  }
  double v = 1.0;
  for (const auto& s : slots_) v *= s.coeff * s.f(path.point(s.knot));
  return shift_ + v;
}

Vec CylindricFunction::slot_gradient(const Manifold& m, const PathSample& path, int i) const {
  const auto& si = slots_[i];
  Vec g = si.f.gradient(m, path.point(si.knot));
  double scale = si.coeff;
  if (mode_ == Mode::product) {
    for (int j = 0; j < n_slots(); ++j) {
      if (j == i) continue;
      const auto& sj = slots_[j];
      scale *= sj.coeff * sj.f(path.point(sj.knot));
    }
  }
  return scale * g;
}

CutoffInfo CylindricFunction::cutoff_info(const Manifold& m, const PathSample& path) const {
  CutoffInfo info;
  if (!cutoff_) return info;
  for (int k = 0; k < path.n_knots; ++k) {
    const double rho = m.dist(path.point(k), cutoff_->center);
    if (rho > info.rho_max) {
      info.rho_max = rho;
      info.argmax = k;
    }
  }
  const double width = cutoff_->r_out - cutoff_->r_in;
  const double u = (info.rho_max - cutoff_->r_in) / width;
  if (u <= 0.0) {
    info.value = 1.0;
  } else if (u >= 1.0) {
    info.value = 0.0;
  } else {
    info.value = 1.0 - c3_step(u);
    info.slope = -c3_step_deriv(u) / width;
  }
  return info;
}

double CylindricFunction::value(const Manifold& m, const PathSample& path) const {
  const double core = core_value(m, path);
  if (!cutoff_) return core;
  return core * cutoff_info(m, path).value;
}

namespace {

// Frame components of every slot gradient, in slot order.
void slot_components(const Manifold& m, const CylindricFunction& F, const PathSample& path,
                     std::vector<Vec>& out) {
  out.resize(F.n_slots());
  for (int i = 0; i < F.n_slots(); ++i) {
    const int k = F.slot(i).knot;
    out[i] = m.frame_components(path.point(k), path.frame_at(k), F.slot_gradient(m, path, i));
  }
}

// |dot(s)|^2 at every knot. The sum over later slots is piecewise constant
// between slot knots, so one suffix pass fills the table.
void dot_sq_table(const CylindricFunction& F, const std::vector<Vec>& comps, int n_knots,
                  int d, std::vector<double>& out) {
  out.assign(n_knots, 0.0);
  Vec acc = Vec::Zero(d);
  int i = F.n_slots() - 1;
  for (int k = n_knots - 1; k >= 0; --k) {
    while (i >= 0 && F.slot(i).knot > k) acc += comps[i--];
    out[k] = acc.squaredNorm();
  }
}

}  // namespace

Vec malliavin_dot(const Manifold& m, const CylindricFunction& F, const PathSample& path,
                  int s_knot, bool boundary_projected) {
  if (s_knot < 0 || s_knot >= path.n_knots)
    throw std::domain_error("malliavin_dot: knot outside the path grid");
  Vec out = Vec::Zero(path.d);
  for (int i = 0; i < F.n_slots(); ++i) {
    const int k = F.slot(i).knot;
    if (k <= s_knot) continue;
    out += m.frame_components(path.point(k), path.frame_at(k), F.slot_gradient(m, path, i));
  }
  if (boundary_projected && path.hit[s_knot]) {
    const Mat p = normal_projector(m, path, s_knot);
    out -= p * out;
  }
  return out;
}

DampedDotTable::DampedDotTable(const Manifold& m, const CylindricFunction& F,
                               const PathSample& path, double dt) {
  const int n = path.n_knots;
  const int d = path.d;
  dot_.assign(n, Vec::Zero(d));
  std::vector<Vec> comps;
  slot_components(m, F, path, comps);
  std::vector<Mat> damp;
  for (int i = 0; i < F.n_slots(); ++i) {
    const int j = F.slot(i).knot;
    backward_damping(m, path, dt, j, damp);
    for (int k = 0; k < j; ++k) dot_[k] += damp[k] * comps[i];
  }
}

DampedBoundReport damped_bound_check(const Manifold& m, const CylindricFunction& F,
                                     const PathSample& path, const PathMu& mu, double dt,
                                     double tol) {
  const int n = path.n_knots;
  DampedBoundReport rep;
  rep.n_checked = n;

  DampedDotTable damped(m, F, path, dt);
  std::vector<Vec> comps;
  slot_components(m, F, path, comps);
  std::vector<double> dsq;
  dot_sq_table(F, comps, n, path.d, dsq);

  // suffix of int_s^T |dot|^2 mu(dr), left-point masses
  std::vector<double> tail(n, 0.0);
  for (int k = n - 2; k >= 0; --k) tail[k] = tail[k + 1] + mu.step_mass(k) * dsq[k];

  for (int s = 0; s < n; ++s) {
    const double lhs = damped.at(s).squaredNorm();
    const double rhs = (1.0 + mu.mass(s, n - 1)) * (dsq[s] + tail[s]);
    const double rel = (lhs - rhs) / (1.0 + rhs);
    rep.max_rel_excess = std::max(rep.max_rel_excess, rel);
  }
  rep.ok = rep.max_rel_excess <= tol;
  return rep;
}

double energy_integrand(const Manifold& m, const CylindricFunction& F, const PathSample& path,
                        const PathMu& mu, int t_knot) {
  const int n = path.n_knots;
  std::vector<Vec> comps;
  slot_components(m, F, path, comps);
  std::vector<double> dsq;
  dot_sq_table(F, comps, n, path.d, dsq);
  double inner = dsq[t_knot];
  for (int k = t_knot; k + 1 < n; ++k) inner += mu.step_mass(k) * dsq[k];
  return (1.0 + mu.mass(t_knot, n - 1)) * inner;
}

double gradient_bound_integrand(const Manifold& m, const CylindricFunction& F,
                                const PathSample& path, const PathMu& mu, double q) {
  const int n = path.n_knots;
  std::vector<Vec> comps;
  slot_components(m, F, path, comps);
  std::vector<double> dsq;
  dot_sq_table(F, comps, n, path.d, dsq);
  double inner = std::pow(dsq[0], 0.5 * q);
  for (int k = 0; k + 1 < n; ++k) inner += mu.step_mass(k) * std::pow(dsq[k], 0.5 * q);
  return std::pow(1.0 + mu.total(), q - 1.0) * inner;
}

std::vector<EnergyFormValue> energy_form_profile(const Manifold& m, const SimConfig& cfg,
                                                 const EnsembleOpts& opts,
                                                 const CylindricFunction& F,
                                                 const BoundFields& b,
                                                 const std::vector<int>& t_knots) {
  const std::size_t width = t_knots.size();
  BatchTable table;
  const double dt = cfg.dt();
  auto visit = [&](std::size_t, const PathSample& path, double* row) {
    PathMu mu(m, path, b, dt);
    const int n = path.n_knots;
    std::vector<Vec> comps;
    slot_components(m, F, path, comps);
    std::vector<double> dsq;
    dot_sq_table(F, comps, n, path.d, dsq);
    std::vector<double> tail(n, 0.0);
    for (int k = n - 2; k >= 0; --k) tail[k] = tail[k + 1] + mu.step_mass(k) * dsq[k];
    for (std::size_t i = 0; i < width; ++i) {
      const int t = t_knots[i];
      row[i] += (1.0 + mu.mass(t, n - 1)) * (dsq[t] + tail[t]);
    }
  };
  const EnsembleResult res = run_ensemble(m, cfg, opts, width, table, visit);

  std::vector<EnergyFormValue> out(width);
  for (std::size_t i = 0; i < width; ++i) {
    const JackEstimate je = jackknife(table, [i](const double* v) { return v[i]; });
    out[i] = {je.value, je.ci, res.n_done};
  }
  return out;
}

EnergyFormValue energy_form(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                            const CylindricFunction& F, const BoundFields& b, int t_knot) {
  return energy_form_profile(m, cfg, opts, F, b, {t_knot}).front();
}

}  // namespace ricprobe

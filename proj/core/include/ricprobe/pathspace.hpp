#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ricprobe/sim.hpp"
#include "ricprobe/test_function.hpp"
#include "ricprobe/transport.hpp"

namespace ricprobe {

// Claimed scalar bounds entering the exponential-weighted path measure: a
// curvature bound K on the manifold and a bending bound sigma near the
// boundary. Both must be nonnegative wherever a path evaluates them.
struct BoundFields {
  std::function<double(const Vec&)> curvature;  // null means 0
  std::function<double(const Vec&)> bending;    // null means 0

  static BoundFields none() { return {}; }
  static BoundFields constant(double k, double s);
};

// Per-path data of the measure mu(ds) = e^{A(s)} dA(s) with
// A(s) = int_0^s K dr + int_0^s sigma dl. Prefix values live on the grid
// knots; interval masses use left-point quadrature (the fold mass of a step
// counts at the step's left knot, with the bending weight read at the
// arrival point, matching the damping update order). The exponential
// primitive e^{A(b)} - e^{A(a)} is kept alongside as a self-check.
class PathMu {
 public:
  PathMu(const Manifold& m, const PathSample& path, const BoundFields& b, double dt);

  int n_knots() const { return static_cast<int>(prefix_.size()); }
  double prefix(int k) const { return prefix_[k]; }
  // Quadrature mass of the step k -> k+1.
  double step_mass(int k) const { return cum_[k + 1] - cum_[k]; }
  // Quadrature mass of [t_a, t_b].
  double mass(int a, int b) const { return cum_[b] - cum_[a]; }
  double total() const { return cum_.back(); }
  // Exponential primitive over [t_a, t_b].
  double mass_closed(int a, int b) const;
  // Largest deviation of the quadrature prefix from the primitive.
  double closed_form_gap() const;

 private:
  std::vector<double> prefix_;  // A_k
  std::vector<double> cum_;     // quadrature prefix masses, cum_[0] = 0
};

// Sup-type cutoff: value l(max_k rho(X_k, center)) with a C^3 profile equal
// to 1 inside r_in and 0 beyond r_out. Its path derivative is carried by the
// argmax knot and vanishes on paths that stay inside r_in.
struct SupCutoff {
  Vec center;
  double r_in = 0.0;
  double r_out = 0.0;
};

struct CutoffInfo {
  double rho_max = 0.0;
  int argmax = 0;
  double value = 1.0;
  double slope = 0.0;  // d/drho of the profile at rho_max
};

struct CylinderSlot {
  int knot = 0;  // grid index, >= 1
  double coeff = 1.0;
  TestFunction f;
};

// Functional of finitely many path knots,
//   sum mode:      F = shift + sum_i c_i f_i(X_{k_i})
//   product mode:  F = shift + prod_i c_i f_i(X_{k_i})
// with at most three slots at strictly increasing positive knots, and an
// optional sup-type cutoff multiplying the whole value.
class CylindricFunction {
 public:
  enum class Mode { sum, product };

  CylindricFunction(Mode mode, std::vector<CylinderSlot> slots, double shift = 0.0);

  static CylindricFunction terminal(int knot, TestFunction f, double coeff = 1.0,
                                    double shift = 0.0);

  Mode mode() const { return mode_; }
  double shift() const { return shift_; }
  int n_slots() const { return static_cast<int>(slots_.size()); }
  const CylinderSlot& slot(int i) const { return slots_[i]; }
  int last_knot() const { return slots_.back().knot; }

  void set_cutoff(SupCutoff c);
  bool has_cutoff() const { return cutoff_.has_value(); }
  const SupCutoff& cutoff() const { return *cutoff_; }

  // Value without the cutoff factor.
  double core_value(const Manifold& m, const PathSample& path) const;
  // Ambient gradient of the core with respect to the slot i point.
  Vec slot_gradient(const Manifold& m, const PathSample& path, int i) const;

  CutoffInfo cutoff_info(const Manifold& m, const PathSample& path) const;
  // Core value times the cutoff.
  double value(const Manifold& m, const PathSample& path) const;

 private:
  Mode mode_;
  std::vector<CylinderSlot> slots_;
  double shift_ = 0.0;
  std::optional<SupCutoff> cutoff_;
};

// Derivative of the path functional in the flat chart of the driving noise,
// evaluated at grid knot s: the sum over slots later than s of the frame
// components of the slot gradients. boundary_projected removes the normal
// component at a flagged evaluation knot.
Vec malliavin_dot(const Manifold& m, const CylindricFunction& F, const PathSample& path,
                  int s_knot, bool boundary_projected = false);

// Same sum with the damping Q_{s,t_i} applied to each term. One backward
// damping pass per slot fills every s at once.
class DampedDotTable {
 public:
  DampedDotTable(const Manifold& m, const CylindricFunction& F, const PathSample& path,
                 double dt);

  const Vec& at(int s_knot) const { return dot_[s_knot]; }
  int n_knots() const { return static_cast<int>(dot_.size()); }

 private:
  std::vector<Vec> dot_;
};

// Pathwise comparison of the damped derivative against the measure-weighted
// composite of plain derivatives,
//   |damped(s)|^2 <= (1 + mu([s,T])) (|dot(s)|^2 + int_s^T |dot(r)|^2 mu(dr)),
// which holds when the bound fields dominate the true tensors along the path.
struct DampedBoundReport {
  double max_rel_excess = -kInf;  // (lhs - rhs) / (1 + rhs), max over knots
  int n_checked = 0;
  bool ok = true;
};

DampedBoundReport damped_bound_check(const Manifold& m, const CylindricFunction& F,
                                     const PathSample& path, const PathMu& mu, double dt,
                                     double tol = 1e-6);

// Per-path integrand of the energy form at grid knot t,
//   (1 + mu([t,T])) (|dot(t)|^2 + int_t^T |dot(s)|^2 mu(ds)).
double energy_integrand(const Manifold& m, const CylindricFunction& F, const PathSample& path,
                        const PathMu& mu, int t_knot);

// Per-path right side of the path-space gradient bound at exponent q,
//   (1 + mu([0,T]))^{q-1} (|dot(0)|^q + int_0^T |dot(s)|^q mu(ds)).
double gradient_bound_integrand(const Manifold& m, const CylindricFunction& F,
                                const PathSample& path, const PathMu& mu, double q);

struct EnergyFormValue {
  double value = 0.0;
  double ci = 0.0;
  std::size_t n = 0;
};

// Ensemble means of the energy integrand at several t knots in one pass.
std::vector<EnergyFormValue> energy_form_profile(const Manifold& m, const SimConfig& cfg,
                                                 const EnsembleOpts& opts,
                                                 const CylindricFunction& F,
                                                 const BoundFields& b,
                                                 const std::vector<int>& t_knots);

EnergyFormValue energy_form(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                            const CylindricFunction& F, const BoundFields& b, int t_knot);

}  // namespace ricprobe

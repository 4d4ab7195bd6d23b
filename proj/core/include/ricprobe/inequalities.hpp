#pragma once

#include <map>
#include <optional>
#include <string>

#include "ricprobe/estimators.hpp"
#include "ricprobe/pathspace.hpp"

namespace ricprobe {

enum class Verdict { pass, fail, inconclusive };

const char* to_string(Verdict v);

// Three-valued call on a signed margin with a 95% interval: Monte Carlo
// cannot certify a strict inequality, only locate its margin. Holding means
// the margin clears minus two intervals; failing needs both a drop below
// that band and a magnitude above three intervals.
Verdict classify_margin(double margin, double ci);

// Shared run knobs. One ensemble drives both sides of each inequality, so
// the margin interval reflects the coupling rather than independent errors.
struct CheckConfig {
  double t_final = 0.2;
  int n_steps = 400;
  std::size_t n_paths = 20000;
  uint64_t master_seed = 1;
  int workers = 1;
  std::size_t n_batches = 64;
  bool antithetic = false;
  // Independent finite-difference route for the gradient side; the report
  // carries the gap. Step must satisfy the grad_pt_f_fd bracket.
  bool fd_cross = true;
  double fd_step = 1e-3;
};

struct InequalityReport {
  std::string name;
  McEstimate lhs;
  McEstimate rhs;
  McEstimate margin;  // rhs - lhs on the shared ensemble
  Verdict verdict = Verdict::inconclusive;
  Vec probe;
  std::map<std::string, double> params;
  std::string note;
  // Gradient checks: distance between the transport-route lhs and the
  // coupled finite-difference value, with the tolerance it was judged by.
  double cross_gap = 0.0;
  double cross_tol = 0.0;
  bool cross_ok = true;
  // Integral checks: trapezoid delta between the base and refined node sets.
  double quad_gap = 0.0;
  // Truncated checks: fraction of paths entering the cutoff ramp and the
  // bound on the neglected cutoff-derivative terms; the band widens the
  // verdict interval.
  double exit_fraction = 0.0;
  double correction_band = 0.0;
};

// Semigroup gradient bound: |grad P_T f|^p at x against the ensemble mean of
// the damping-mass composite (1 + mu)^p |grad f|^p at the path endpoint.
InequalityReport check_gradient_ineq_1(const Manifold& m, const Vec& x, const TestFunction& f,
                                       double p, const BoundFields& b, const CheckConfig& cc);

// Gradient defect bound: |grad f - half grad P_T f|^q at x against the
// composite of the transported-difference term and the mass-weighted
// endpoint gradient. Sensitive to the upper curvature and bending bounds,
// where the first display only sees the lower ones.
InequalityReport check_gradient_ineq_2(const Manifold& m, const Vec& x, const TestFunction& f,
                                       double q, const BoundFields& b, const CheckConfig& cc);

// Path-space gradient bound for a cylindric functional: the damped
// derivative at time zero against the measure-weighted composite of plain
// derivatives. On a single-slot functional this coincides with the first
// gradient check at p = q, path by path.
InequalityReport check_pathspace_gradient(const Manifold& m, const Vec& x,
                                          const CylindricFunction& F, double q,
                                          const BoundFields& b, const CheckConfig& cc);

// Conditioning controls for the variance and entropy checks: nested width
// plus optional closed-form shortcuts. The semigroup oracle follows the
// conditional_expectation contract (sum mode, shared slot function).
// f_squared must be a slot representation of F^2 (verified pathwise); with
// semigroup_sq it makes the conditional square analytic, otherwise the tail
// is resimulated with a squaring transform.
struct EntropyOpts {
  int n_inner = 64;
  int quad_intervals = 8;  // base trapezoid count; the check refines at 2x
  std::function<double(double, const Vec&)> semigroup;
  std::optional<CylindricFunction> f_squared;
  std::function<double(double, const Vec&)> semigroup_sq;
};

// Log-Sobolev display: entropy gain of the conditional square between t0 and
// t1 against four times the energy-form integral over [t0, t1].
InequalityReport check_logsobolev(const Manifold& m, const Vec& x, const CylindricFunction& F,
                                  double t0, double t1, const BoundFields& b,
                                  const CheckConfig& cc, const EntropyOpts& eo = {});

// Poincare display: variance of the conditional mean at t against twice the
// energy-form integral over [0, t].
InequalityReport check_poincare(const Manifold& m, const Vec& x, const CylindricFunction& F,
                                double t, const BoundFields& b, const CheckConfig& cc,
                                const EntropyOpts& eo = {});

enum class TruncatedMode { poincare, logsobolev };

// Same displays over cutoff-carrying functionals: F must hold a sup cutoff.
// Poincare mode conditions at t1 and requires t0 = 0. The report carries the
// measured ramp fraction and a sup bound on the neglected cutoff-derivative
// terms; the run aborts when the ramp fraction exceeds 1e-3 (widen r_in or
// shorten the horizon).
InequalityReport check_truncated(const Manifold& m, const Vec& x, const CylindricFunction& F,
                                 TruncatedMode mode, double t0, double t1,
                                 const BoundFields& b, const CheckConfig& cc,
                                 const EntropyOpts& eo = {});

}  // namespace ricprobe

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ricprobe/manifolds.hpp"
#include "ricprobe/pathspace.hpp"
#include "ricprobe/sim.hpp"
#include "ricprobe/stats.hpp"
#include "ricprobe/test_function.hpp"

namespace ricprobe {

// Semigroup value P_T f(x0) by ensemble average over cfg.t_final.
McEstimate pt_f(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                const TestFunction& f);

// Semigroup gradient at the start point. The vector is ambient; component
// intervals refer to the orthonormal frame the manifold assigns there, so the
// two routes below are comparable entry by entry.
struct GradientEstimate {
  Vec value;
  Vec component_ci;
  McEstimate norm;
  EnsembleResult runs;
};

// Derivative formula route: mean of U_0 Q_{0,T} U_T^{-1} grad f(X_T), the
// damping product absorbing curvature drift and boundary bending along the
// way. Unbiased up to time discretization.
GradientEstimate grad_pt_f_bismut(const Manifold& m, const SimConfig& cfg,
                                  const EnsembleOpts& opts, const TestFunction& f);

// Independent route: central differences of pt_f along the frame's geodesic
// rays, every shifted start simulated from the same noise so the difference
// cancels the shared randomness. h must lie in [1e-4, 1e-2].
GradientEstimate grad_pt_f_fd(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts,
                              const TestFunction& f, double h);

// Ceiling for outer * inner nested simulation work.
inline constexpr double kNestedBudgetCap = 1e7;
void check_nested_budget(std::size_t n_outer, int n_inner);

// Conditional expectation of a path functional given the trajectory through
// t_knot: average transform(F) over n_inner redraws of the tail, the redraws
// drawn from replicate streams keyed to (path, knot). A supplied semigroup
// oracle s, y -> P_s f(y) replaces the nested pass for a plain sum-mode
// functional: slots at or before t_knot evaluate on the kept prefix, later
// slots through the oracle. The oracle stands for P_s applied to the slot
// test function, so with several pending slots they must share one f.
// transform defaults to the identity and forces the nested route.
struct ConditionalOpts {
  int n_inner = 64;
  std::function<double(double, const Vec&)> semigroup;
  std::function<double(double)> transform;
};

double conditional_expectation(const Manifold& m, const SimConfig& cfg,
                               const CylindricFunction& F, const PathSample& base,
                               uint64_t path_key, int t_knot, const ConditionalOpts& opts,
                               PathSample& scratch);

// Halving horizons t_max * 2^{-j}, j = 0 .. count-1.
std::vector<double> horizon_schedule(double t_max, int count);

enum class LimitModel { affine_t, affine_sqrt_t };

// Short-time extrapolation record: the schedule, the per-horizon estimates
// and the weighted affine fit in T (interior) or sqrt(T) (boundary) whose
// intercept is the limit.
struct LimitFit {
  LimitModel model = LimitModel::affine_t;
  std::vector<double> horizon;
  std::vector<McEstimate> value;
  AffineFit fit;
};

// Weighted least squares against the model abscissa; needs at least four
// schedule points and finite positive intervals.
LimitFit short_time_limit(LimitModel model, std::vector<double> horizon,
                          std::vector<McEstimate> value);

struct CurvatureOpts {
  double t_max = 0.08;  // boundary runs conventionally use 0.04
  int n_horizons = 6;
  int n_steps = 200;  // grid size at every horizon, so dt scales with T
  std::size_t n_paths = 20000;
  uint64_t master_seed = 1;
  int workers = 1;
  std::size_t n_batches = 64;
  bool antithetic = true;
};

struct FormTrack {
  std::string method;
  LimitFit fit;
  // Gap between the affine intercept and a quadratic refit of the same data;
  // sizes the truncation bias of the affine model, which dominates once the
  // statistical interval collapses (deterministic integrands).
  double truncation_shift = 0.0;
};

struct CurvatureReport {
  Vec probe;
  Vec direction;  // grad f at the probe
  double value = 0.0;
  double ci = 0.0;
  FormTrack grad_p1;
  FormTrack grad_p2;
  FormTrack variance;
  bool forms_consistent = true;
  CertifyReport cert;
};

// Curvature-drift form Ric_Z(grad f, grad f) at an interior probe from the
// short-time growth of semigroup gradient and variance functionals; the
// headline value is the p = 2 gradient-form intercept, the other tracks are
// cross-checks and the report flags disagreement beyond three combined
// intervals. The probe function must certify at the probe.
CurvatureReport ricci_estimate(const Manifold& m, const Vec& probe, const TestFunction& f,
                               const CurvatureOpts& opts);

// Boundary bending form against grad f at a boundary probe; same functionals
// under sqrt-horizon scaling.
CurvatureReport second_form_estimate(const Manifold& m, const Vec& probe, const TestFunction& f,
                                     const CurvatureOpts& opts);

// Mean boundary local time over cfg.t_final.
McEstimate local_time_mean(const Manifold& m, const SimConfig& cfg, const EnsembleOpts& opts);

// Short-time laws of the damping measure mass from a boundary start: the mean
// over sqrt(T) tends to 2 sigma / sqrt(pi), its square over sqrt(T) to zero.
struct MuLimits {
  LimitFit mean_over_sqrt;
  LimitFit mean_sq_over_sqrt;
};

MuLimits mu_sqrt_limits(const Manifold& m, const Vec& probe, const BoundFields& b,
                        const CurvatureOpts& opts);

// Interior law: mean mass over T tends to the curvature bound at the probe.
LimitFit mu_interior_limit(const Manifold& m, const Vec& probe, const BoundFields& b,
                           const CurvatureOpts& opts);

// Integrability diagnostic: sample mean of exp((2+eps) A_T) with A_T the
// accumulated damping exponent. An interval wider than half the value flags
// tails too heavy for the downstream confidence intervals to be trusted.
struct ExpMomentReport {
  McEstimate moment;
  bool heavy_tail = false;
};

ExpMomentReport exp_moment_diagnostic(const Manifold& m, const SimConfig& cfg,
                                      const EnsembleOpts& opts, const BoundFields& b,
                                      double eps = 0.5);

struct IsometryOpts {
  double t_final = 0.2;
  int n_steps = 400;
  std::vector<double> eps = {0.01, 0.02};
  std::size_t n_paths = 20000;
  uint64_t master_seed = 1;
  int workers = 1;
  std::size_t n_batches = 64;
};

// One conditioning scale: variance of the conditional semigroup mean against
// twice the accumulated energy of the conditioned damped gradient. The
// conditioned integrand commutes through the sphere semigroup exactly; the
// plain variant keeps the raw damped magnitude under the integral and is
// reported for comparison, not gated. gap = lhs - rhs is estimated on the
// shared ensemble so its interval reflects the coupling.
struct IsometryPoint {
  double eps = 0.0;
  McEstimate lhs;
  McEstimate rhs;
  McEstimate rhs_plain;
  McEstimate gap;
  McEstimate normalized;    // lhs / (4 eps)
  McEstimate half_grad_sq;  // half squared norm of the damped gradient mean
  bool within_ci = false;
};

struct IsometryReport {
  std::vector<IsometryPoint> points;
};

// Conditional-variance identity for a linear observable f = <a, x> on the
// sphere, which the heat flow scales by exp(-dim * t) so conditioning is
// analytic. Checks lhs = rhs within the gap interval at every eps; the
// normalized column tends to half the squared semigroup gradient.
IsometryReport martingale_isometry(const Sphere& m, const Vec& x0, const Vec& a,
                                   const IsometryOpts& opts);

}  // namespace ricprobe

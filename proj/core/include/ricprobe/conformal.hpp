#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "ricprobe/conformal_factor.hpp"
#include "ricprobe/estimators.hpp"
#include "ricprobe/manifold.hpp"

namespace ricprobe {

// Conformal deformation g -> phi^{-2} g of a catalog manifold, with phi a
// positive scalar evaluated on ambient points. Curvature and boundary forms
// come out against the scaled frame phi * e_a, whose columns are unit vectors
// for the deformed metric; that is the normalization the path-space bounds
// consume. All derivatives of phi are taken along base geodesics, so a factor
// that is constant near x cannot move any output at x.

inline constexpr double kConformalFdStep = 1e-3;

using VectorField = std::function<Vec(const Vec&)>;

// Pointwise derivative data of the factor in a given orthonormal frame.
struct ConformalScalars {
  double phi = 1.0;
  double log_phi = 0.0;
  Vec grad_log;         // ambient tangent representative of grad log phi
  Vec grad_log_frame;   // frame components of the same vector
  double grad_log_sq = 0.0;
  Mat hess_log;         // covariant Hessian of log phi, frame components
  double lap_log = 0.0; // its trace
};

ConformalScalars conformal_scalars(const Manifold& m, const ConformalFactor& phi, const Vec& x,
                                   const Mat& frame, double h = kConformalFdStep);

// Deformed metric on ambient tangent representatives.
double conformal_inner(const Manifold& m, const ConformalFactor& phi, const Vec& x, const Vec& a,
                       const Vec& b);

// Orthonormal frame whose first column is the given unit tangent vector.
Mat direction_frame(const Manifold& m, const Vec& x, const Vec& first);

// Covariant derivative of Y along X for the deformed metric: the base
// derivative plus the three factor terms
//   - <X, grad log phi> Y - <Y, grad log phi> X + <X, Y> grad log phi.
// Fields map manifold points to ambient vectors; the base derivative is a
// transport finite difference along the geodesic through x.
Vec transformed_connection(const Manifold& m, const ConformalFactor& phi, const Vec& x,
                           const VectorField& X, const VectorField& Y,
                           double h = kConformalFdStep);

struct ConformalCurvature {
  Mat frame;       // base-orthonormal columns the components refer to
  Mat ric;         // deformed Ricci form against the scaled frame
  Mat drift_grad;  // deformed covariant derivative form of the drift phi Z
  double norm = 0.0;  // largest |eigenvalue| of the symmetrized ric - drift_grad
  ConformalScalars scalars;
};

ConformalCurvature transformed_curvature(const Manifold& m, const ConformalFactor& phi,
                                         const Vec& x, const Mat& frame,
                                         double h = kConformalFdStep);
ConformalCurvature transformed_curvature(const Manifold& m, const ConformalFactor& phi,
                                         const Vec& x, double h = kConformalFdStep);

struct ConformalBending {
  Mat frame;
  Mat form;        // deformed boundary form against the scaled frame, tangentially projected
  double norm = 0.0;  // largest |eigenvalue| on the boundary tangent subspace
  double normal_log_rate = 0.0;  // derivative of log phi along the inward normal
};

ConformalBending transformed_second_form(const Manifold& m, const ConformalFactor& phi,
                                         const Vec& x, double h = kConformalFdStep);

// The pointwise package: curvature, the boundary form when x sits on the
// boundary, and the transformed drift vector phi Z.
struct ConformalTensors {
  ConformalCurvature curvature;
  std::optional<ConformalBending> bending;
  Vec drift;
};

ConformalTensors conformal_tensors(const Manifold& m, const ConformalFactor& phi, const Vec& x,
                                   double h = kConformalFdStep);

// Grid estimate of a supremum, with the same grid at twice the resolution as
// a convergence check.
struct GridSup {
  double value = 0.0;       // refined-grid supremum
  double refine_gap = 0.0;  // |refined - coarse|
  Vec argmax;
  std::size_t n_points = 0;  // admissible refined samples
};

struct ConformalGrid {
  Vec center;
  double radius = 2.0;
  int n_per_axis = 9;
  // Samples with phi below the floor count as outside the deformed manifold.
  double phi_floor = 1e-7;
};

// The deformed manifold as a bounded-geometry package: the base, the factor,
// the drift phi Z, and grid suprema of the curvature-drift norm and of the
// boundary form norm.
struct ConformalManifold {
  const Manifold* base = nullptr;
  ConformalFactor phi;
  DriftField drift;
  GridSup curvature_sup;
  GridSup bending_sup;
};

ConformalManifold make_conformal_manifold(const Manifold& base, ConformalFactor phi,
                                          const ConformalGrid& grid);

// Chart finite-difference oracles: curvature straight from a coordinate
// metric by nested central differences. Nothing on this path knows about
// conformal identities, so it can referee them.
using ChartMetric = std::function<Mat(const Vec&)>;

Mat chart_christoffel_fd(const ChartMetric& g, const Vec& u, int k, double h = 1e-3);
Mat chart_ricci_fd(const ChartMetric& g, const Vec& u, double h = 5e-3);
double chart_gauss_fd(const ChartMetric& g, const Vec& u, double h = 5e-3);

// Tangent-normalized stereographic chart of the unit 2-sphere: point(0) is the
// chart center, jacobian(0) maps the chart axes isometrically, and the round
// metric pulls back to (4 / (4 + |u|^2))^2 times the identity.
struct SphereChart {
  Vec pole;
  Mat axes;  // ambient columns, orthonormal tangents at the pole
  Vec point(const Vec& u) const;
  Mat jacobian(const Vec& u) const;
};

SphereChart sphere_chart(const Manifold& m, const Vec& p, const Vec& first_axis);

struct LocalityOpts {
  CurvatureOpts curvature;
  double chart_radius = 2.5;
  double fd_step = kConformalFdStep;
};

// Paired curvature estimates: the base diffusion at the probe against the
// deformed diffusion simulated in a chart carrying the metric phi^{-2} g,
// probed along the same direction. The pointwise tensors predict the shift
// between the two, exactly zero whenever phi is constant near the probe.
struct LocalityReport {
  CurvatureReport plain;
  CurvatureReport conformal;
  double base_form = 0.0;        // analytic curvature-drift form along the probe direction
  double conformal_form = 0.0;   // transformed-curvature prediction, same direction
  double predicted_shift = 0.0;  // conformal_form - base_form
  double difference = 0.0;       // conformal.value - plain.value
  double combined_ci = 0.0;      // plain.ci + conformal.ci
  bool agree = false;            // |difference - predicted_shift| <= 2 * combined_ci
};

LocalityReport locality_experiment(const Manifold& m, const Vec& probe, const ConformalFactor& phi,
                                   const TestFunction& f, const LocalityOpts& opts);

}  // namespace ricprobe

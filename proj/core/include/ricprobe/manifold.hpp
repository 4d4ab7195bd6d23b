#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "ricprobe/types.hpp"

namespace ricprobe {

// Drift vector field given by an ambient representative; the manifold projects
// it to the tangent space where needed. The optional flat Jacobian enables an
// exact covariant derivative on flat manifolds; otherwise a geodesic central
// difference is used.
struct DriftField {
  std::function<Vec(const Vec&)> value;          // ambient Z(x); empty = zero field
  std::function<Mat(const Vec&)> flat_jacobian;  // dZ/dx, optional
  std::string label = "none";

  bool is_zero() const { return !value; }

  static DriftField zero();
  // Constant ambient drift Z(x) = z0.
  static DriftField constant(const Vec& z0);
  // Z = -coeff * |x-c|^(power-2) (x-c), the negative gradient of
  // f = coeff |x-c|^power / power, for power in {2, 4}.
  static DriftField radial_gradient(double coeff, int power, const Vec& center);
  // Same, multiplied by a C^3 radial window around the center. The sign flag
  // (+1 outward, -1 inward) selects which way the field points.
  static DriftField windowed_radial(double coeff, int sign, const Vec& center,
                                    double r_in, double r_out);
};

struct BoundaryData {
  double dist = kInf;    // signed distance to the boundary, positive inside
  Vec normal;            // inward unit normal (ambient), valid if has_normal
  bool has_normal = false;
};

struct Reflected {
  Vec point;
  double push = 0.0;  // distance the proposal moved along the inward normal
};

class Manifold {
 public:
  virtual ~Manifold() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;          // intrinsic dimension d
  virtual int ambient_dim() const = 0;  // representation dimension n
  virtual bool has_boundary() const { return false; }

  // Constraint handling.
  virtual double residual(const Vec& x) const = 0;
  virtual Vec project(const Vec& x) const = 0;
  virtual Vec tangent_project(const Vec& x, const Vec& v) const = 0;

  // Riemannian metric on ambient representatives of tangent vectors.
  virtual double inner(const Vec& x, const Vec& a, const Vec& b) const {
    (void)x;
    return a.dot(b);
  }
  double norm(const Vec& x, const Vec& a) const { return std::sqrt(inner(x, a, a)); }

  // Riemannian gradient from a coordinate differential (covector in ambient
  // components): tangent projection plus metric raise.
  virtual Vec raise_differential(const Vec& x, const Vec& df) const {
    return tangent_project(x, df);
  }

  // Exponential map (exact where available, second-order retraction on chart
  // manifolds) and parallel transport of a single tangent vector along the
  // geodesic x -> y.
  virtual Vec exp(const Vec& x, const Vec& v) const = 0;
  virtual Vec transport(const Vec& x, const Vec& y, const Vec& w) const = 0;
  virtual double dist(const Vec& x, const Vec& y) const = 0;
  // Unit tangent at y pointing away from x0 along the minimal geodesic.
  virtual Vec dist_gradient(const Vec& x0, const Vec& y) const = 0;

  // Boundary geometry.
  virtual BoundaryData boundary(const Vec& x) const {
    (void)x;
    return {};
  }
  virtual Reflected reflect(const Vec& exterior) const;
  // Second fundamental form of the boundary in frame components,
  // II(u e_a, u e_b) with boundary-tangential projection and the convention
  // II(Y,Y) = <nabla_Y Y, N> (inward normal; convex boundary => positive).
  virtual Mat second_form(const Vec& x, const Mat& frame) const;

  // Curvature: Ric(u e_a, u e_b) in frame components.
  virtual Mat ricci(const Vec& x, const Mat& frame) const = 0;

  // Chart manifolds may declare a validity radius; a proposal beyond it makes
  // the path unusable (counted and discarded by the ensemble runner).
  virtual std::optional<double> chart_bound() const { return std::nullopt; }

  // ---- frame utilities -----------------------------------------------------

  // Deterministic orthonormal tangent frame at x (columns).
  Mat orthonormal_frame(const Vec& x) const;
  // Metric Gram matrix of frame columns.
  Mat frame_gram(const Vec& x, const Mat& frame) const;
  // Metric components of a tangent vector in an orthonormal frame.
  Vec frame_components(const Vec& x, const Mat& frame, const Vec& v) const;
  // Modified Gram-Schmidt in the metric at x (in place, column order kept).
  void orthonormalize(const Vec& x, Mat& frame) const;
  // Transport all frame columns along x -> y and re-orthonormalize at y.
  Mat transport_frame(const Vec& x, const Vec& y, const Mat& frame) const;

  // ---- drift ---------------------------------------------------------------

  void set_drift(DriftField z) { drift_ = std::move(z); }
  const DriftField& drift() const { return drift_; }
  bool has_drift() const { return !drift_.is_zero(); }
  // Tangent-projected drift value.
  Vec drift_value(const Vec& x) const;
  // Covariant derivative of the drift field along tangent vector w.
  virtual Vec drift_covariant_deriv(const Vec& x, const Vec& w) const;

  // Bakry-Emery tensor Ric_Z = Ric - grad Z in frame components.
  Mat ricci_z(const Vec& x, const Mat& frame) const;
  // Largest |eigenvalue| of the symmetrized Bakry-Emery tensor at x.
  double ricci_z_norm(const Vec& x) const;

 protected:
  DriftField drift_ = DriftField::zero();
};

}  // namespace ricprobe

#pragma once

#include <memory>

#include "ricprobe/conformal_factor.hpp"
#include "ricprobe/manifold.hpp"

namespace ricprobe {

// Unit sphere S^d embedded in R^{d+1}. Ric = (d-1) g, no boundary.
class Sphere : public Manifold {
 public:
  explicit Sphere(int d);

  std::string name() const override;
  int dim() const override { return d_; }
  int ambient_dim() const override { return d_ + 1; }

  double residual(const Vec& x) const override;
  Vec project(const Vec& x) const override;
  Vec tangent_project(const Vec& x, const Vec& v) const override;

  Vec exp(const Vec& x, const Vec& v) const override;
  Vec transport(const Vec& x, const Vec& y, const Vec& w) const override;
  double dist(const Vec& x, const Vec& y) const override;
  Vec dist_gradient(const Vec& x0, const Vec& y) const override;

  Mat ricci(const Vec& x, const Mat& frame) const override;

 private:
  int d_;
};

// Geodesic ball {theta <= theta0} around the north pole of S^2, where theta is
// the polar angle. The boundary circle has II = cot(theta0) (I - nu nu^T) in
// the inward-normal convention, so the cap is convex for theta0 < pi/2.
class SphericalCap : public Sphere {
 public:
  explicit SphericalCap(double theta0);

  std::string name() const override;
  bool has_boundary() const override { return true; }

  BoundaryData boundary(const Vec& x) const override;
  Reflected reflect(const Vec& exterior) const override;
  Mat second_form(const Vec& x, const Mat& frame) const override;

  double theta0() const { return theta0_; }

 private:
  double theta0_;
};

// Flat half-space {x in R^d : x_d >= 0}. Ric = 0, II = 0 (totally geodesic
// boundary), mirror reflection.
class HalfSpace : public Manifold {
 public:
  explicit HalfSpace(int d);

  std::string name() const override;
  int dim() const override { return d_; }
  int ambient_dim() const override { return d_; }
  bool has_boundary() const override { return true; }

  double residual(const Vec& x) const override;
  Vec project(const Vec& x) const override;
  Vec tangent_project(const Vec& x, const Vec& v) const override;

  Vec exp(const Vec& x, const Vec& v) const override;
  Vec transport(const Vec& x, const Vec& y, const Vec& w) const override;
  double dist(const Vec& x, const Vec& y) const override;
  Vec dist_gradient(const Vec& x0, const Vec& y) const override;

  BoundaryData boundary(const Vec& x) const override;
  Reflected reflect(const Vec& exterior) const override;
  Mat second_form(const Vec& x, const Mat& frame) const override;

  Mat ricci(const Vec& x, const Mat& frame) const override;
  Vec drift_covariant_deriv(const Vec& x, const Vec& w) const override;

 private:
  int d_;
};

// Two-dimensional disk chart with conformal metric g = lambda^2 (du^2 + dv^2).
// Geodesics use a second-order retraction, transport integrates the conformal
// Christoffel symbols at the step midpoint. Gauss curvature is
// K = -lambda^{-2} Laplace(log lambda).
class ConformalDisk : public Manifold {
 public:
  ConformalDisk(ConformalFactor lambda, double chart_radius);

  std::string name() const override;
  int dim() const override { return 2; }
  int ambient_dim() const override { return 2; }

  double residual(const Vec& x) const override;
  Vec project(const Vec& x) const override;
  Vec tangent_project(const Vec& x, const Vec& v) const override;

  double inner(const Vec& x, const Vec& a, const Vec& b) const override;
  Vec raise_differential(const Vec& x, const Vec& df) const override;

  Vec exp(const Vec& x, const Vec& v) const override;
  Vec transport(const Vec& x, const Vec& y, const Vec& w) const override;
  double dist(const Vec& x, const Vec& y) const override;
  Vec dist_gradient(const Vec& x0, const Vec& y) const override;

  Mat ricci(const Vec& x, const Mat& frame) const override;
  std::optional<double> chart_bound() const override { return chart_radius_; }

  double gauss_curvature(const Vec& x) const;
  const ConformalFactor& factor() const { return lambda_; }

 private:
  ConformalFactor lambda_;
  double chart_radius_;
};

std::unique_ptr<Manifold> make_sphere(int d);
std::unique_ptr<Manifold> make_spherical_cap(double theta0);
std::unique_ptr<Manifold> make_half_space(int d);
std::unique_ptr<Manifold> make_conformal_disk(ConformalFactor lambda, double chart_radius);

}  // namespace ricprobe

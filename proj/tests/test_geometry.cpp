#include <cmath>

#include "doctest.h"
#include "ricprobe/manifolds.hpp"
#include "ricprobe/test_function.hpp"

using namespace ricprobe;

namespace {

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Rotation angle of a 2-frame after transport, from the overlap matrix.
double frame_rotation_angle(const Mat& before, const Mat& after) {
  const double c = after.col(0).dot(before.col(0)) + after.col(1).dot(before.col(1));
  const double s = after.col(1).dot(before.col(0)) - after.col(0).dot(before.col(1));
  return std::atan2(s, c);
}

}  // namespace

TEST_CASE("sphere projection, exponential and distance") {
  Sphere s(2);
  const Vec x = s.project(v3(1.0, 2.0, -2.0));
  CHECK(x.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.residual(x) < 1e-15);

  const Vec t = s.tangent_project(x, v3(0.3, -0.4, 1.0));
  CHECK(std::abs(t.dot(x)) < 1e-15);

  const Vec v = s.tangent_project(x, v3(0.0, 1.0, 0.0));
  const Vec y = s.exp(x, v);
  CHECK(y.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.dist(x, y) == doctest::Approx(v.norm()).epsilon(1e-12));

  CHECK(s.dist(v3(1, 0, 0), v3(0, 1, 0)) == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(s.dist(v3(1, 0, 0), v3(-1, 0, 0)) == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(s.exp(x, Vec::Zero(3)).isApprox(x, 1e-15));
}

TEST_CASE("sphere distance gradient points along the connecting geodesic") {
  Sphere s(2);
  const Vec x0 = v3(1, 0, 0);
  const Vec y = v3(0, 1, 0);
  const Vec g = s.dist_gradient(x0, y);
  CHECK(g.isApprox(v3(-1, 0, 0), 1e-14));

  // Directional check at a generic point: moving along g increases distance
  // at unit rate.
  const Vec y2 = s.project(v3(0.2, -0.7, 0.4));
  const Vec g2 = s.dist_gradient(x0, y2);
  CHECK(s.norm(y2, g2) == doctest::Approx(1.0).epsilon(1e-12));
  const double h = 1e-6;
  const double dplus = s.dist(x0, s.exp(y2, h * g2));
  const double dminus = s.dist(x0, s.exp(y2, -h * g2));
  CHECK((dplus - dminus) / (2 * h) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sphere transport is an isometry and inverts") {
  Sphere s(2);
  const Vec x = s.project(v3(0.3, -0.5, 0.8));
  const Vec y = s.project(v3(-0.6, 0.2, 0.9));
  const Vec w = s.tangent_project(x, v3(0.9, 0.1, -0.4));
  const Vec u = s.tangent_project(x, v3(-0.2, 0.8, 0.5));

  const Vec wt = s.transport(x, y, w);
  const Vec ut = s.transport(x, y, u);
  CHECK(std::abs(wt.dot(y)) < 1e-14);
  CHECK(wt.norm() == doctest::Approx(w.norm()).epsilon(1e-14));
  CHECK(wt.dot(ut) == doctest::Approx(w.dot(u)).epsilon(1e-13));

  const Vec back = s.transport(y, x, wt);
  CHECK(back.isApprox(w, 1e-12));
}

TEST_CASE("holonomy around the octant triangle is a quarter turn") {
  Sphere s(2);
  const Vec a = v3(1, 0, 0);
  const Vec b = v3(0, 1, 0);
  const Vec c = v3(0, 0, 1);
  Mat f = s.orthonormal_frame(a);
  const Mat f0 = f;
  f = s.transport_frame(a, b, f);
  f = s.transport_frame(b, c, f);
  f = s.transport_frame(c, a, f);
  // Enclosed area = 4 pi / 8.
  CHECK(std::abs(frame_rotation_angle(f0, f)) == doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("holonomy around a latitude circle matches the enclosed area") {
  Sphere s(2);
  const double theta = 0.5;
  const int n = 4096;
  auto point = [&](int k) {
    const double phi = 2.0 * kPi * k / n;
    return v3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
              std::cos(theta));
  };
  Mat f = s.orthonormal_frame(point(0));
  const Mat f0 = f;
  for (int k = 0; k < n; ++k) f = s.transport_frame(point(k), point(k + 1), f);
  const double expected = 2.0 * kPi * (1.0 - std::cos(theta));
  CHECK(std::abs(frame_rotation_angle(f0, f)) == doctest::Approx(expected).epsilon(1e-5));
}

TEST_CASE("sphere curvature tensor in an orthonormal frame") {
  for (int d : {2, 3, 5}) {
    Sphere s(d);
    Vec x = Vec::Zero(d + 1);
    x[0] = 0.6;
    x[d] = 0.8;
    const Mat f = s.orthonormal_frame(x);
    CHECK((s.frame_gram(x, f) - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-14);
    const Mat r = s.ricci(x, f);
    CHECK((r - (d - 1.0) * Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("windowed outward drift shifts the curvature tensor by its strength") {
  Sphere s(2);
  const Vec pole = v3(0, 0, 1);
  s.set_drift(DriftField::windowed_radial(4.0, +1, pole, 0.4, 0.8));
  const Mat f = s.orthonormal_frame(pole);
  const Mat rz = s.ricci_z(pole, f);
  // Ric = g on the unit 2-sphere; the outward field contributes -4 g inside
  // the window plateau.
  CHECK((rz - (-3.0) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(s.ricci_z_norm(pole) == doctest::Approx(3.0).epsilon(1e-6));

  // Outside the window the field vanishes identically.
  const Vec far = v3(1, 0, 0);
  const Mat rz_far = s.ricci_z(far, s.orthonormal_frame(far));
  CHECK((rz_far - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("cap boundary data and fold reflection") {
  const double theta0 = kPi / 3;
  SphericalCap cap(theta0);
  CHECK(cap.has_boundary());

  const Vec xb = v3(std::sin(theta0), 0, std::cos(theta0));
  const auto bd = cap.boundary(xb);
  CHECK(bd.dist == doctest::Approx(0.0).epsilon(1e-15));
  REQUIRE(bd.has_normal);
  CHECK(bd.normal.isApprox(v3(-std::cos(theta0), 0, std::sin(theta0)), 1e-14));
  CHECK(std::abs(bd.normal.dot(xb)) < 1e-14);

  // Signed distance increases at unit rate along the inward normal.
  const double h = 1e-5;
  CHECK(cap.boundary(cap.exp(xb, h * bd.normal)).dist == doctest::Approx(h).epsilon(1e-4));

  // Fold an exterior point back across the rim: polar angle reflects, the
  // azimuth survives, and the push is twice the overshoot.
  const double theta_out = theta0 + 0.05;
  const double phi = 1.2;
  const Vec ext = v3(std::sin(theta_out) * std::cos(phi), std::sin(theta_out) * std::sin(phi),
                     std::cos(theta_out));
  const auto refl = cap.reflect(ext);
  CHECK(std::acos(refl.point[2]) == doctest::Approx(theta0 - 0.05).epsilon(1e-12));
  CHECK(std::atan2(refl.point[1], refl.point[0]) == doctest::Approx(phi).epsilon(1e-12));
  CHECK(refl.push == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("cap rim bending form has eigenvalues {0, cot theta0}") {
  const double theta0 = kPi / 3;
  SphericalCap cap(theta0);
  const Vec xb = v3(std::sin(theta0), 0, std::cos(theta0));
  const auto bd = cap.boundary(xb);
  REQUIRE(bd.has_normal);

  Mat frame(3, 2);
  frame.col(0) = bd.normal;       // normal direction
  frame.col(1) = v3(0, 1, 0);     // rim tangent
  const Mat ii = cap.second_form(xb, frame);
  const double cot = 1.0 / std::tan(theta0);
  CHECK(ii(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ii(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ii(1, 1) == doctest::Approx(cot).epsilon(1e-13));
  CHECK(cot == doctest::Approx(0.5773502691896258).epsilon(1e-15));
}

TEST_CASE("half space reflection and flat geometry") {
  HalfSpace hs(2);
  CHECK(hs.has_boundary());
  const auto bd = hs.boundary(v2(0.4, 0.7));
  CHECK(bd.dist == doctest::Approx(0.7));
  CHECK(bd.normal.isApprox(v2(0, 1)));

  const auto refl = hs.reflect(v2(0.4, -0.03));
  CHECK(refl.point.isApprox(v2(0.4, 0.03)));
  CHECK(refl.push == doctest::Approx(0.06));

  const Mat f = hs.orthonormal_frame(v2(1, 1));
  CHECK((hs.ricci(v2(1, 1), f)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((hs.second_form(v2(1, 0), f)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("half space quadratic well gives the identity curvature shift") {
  HalfSpace hs(2);
  hs.set_drift(DriftField::radial_gradient(1.0, 2, Vec::Zero(2)));
  const Vec x = v2(1.0, 0.5);
  const Mat f = hs.orthonormal_frame(x);
  const Mat rz = hs.ricci_z(x, f);
  CHECK((rz - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  // Same field without the analytic Jacobian exercises the geodesic
  // finite-difference fallback.
  HalfSpace hs_fd(2);
  DriftField z;
  z.value = [](const Vec& p) { return Vec(-p); };
  hs_fd.set_drift(z);
  const Mat rz_fd = hs_fd.ricci_z(x, f);
  CHECK((rz_fd - rz).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("half space quartic well curvature tensor at a boundary probe") {
  HalfSpace hs(2);
  hs.set_drift(DriftField::radial_gradient(1.0, 4, Vec::Zero(2)));
  const Vec x = v2(1.0, 0.0);
  const Mat f = hs.orthonormal_frame(x);
  const Mat rz = hs.ricci_z(x, f);
  Mat expected(2, 2);
  expected << 3.0, 0.0, 0.0, 1.0;
  CHECK((rz - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stereographic disk has unit curvature everywhere") {
  ConformalDisk disk(ConformalFactor::stereographic(), 2.0);
  for (const Vec& u : {v2(0, 0), v2(0.3, -0.2), v2(0.8, 0.1)}) {
    CHECK(disk.gauss_curvature(u) == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Derivative-free factor takes the finite-difference route.
  ConformalFactor fd_only;
  fd_only.log_value = [](const Vec& u) { return -std::log1p(0.25 * u.squaredNorm()); };
  ConformalDisk disk_fd(fd_only, 2.0);
  CHECK(disk_fd.gauss_curvature(v2(0.3, -0.2)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("disk metric, transport isometry and radial geodesics") {
  ConformalDisk disk(ConformalFactor::stereographic(), 2.0);
  const Vec u = v2(0.3, 0.4);
  const double lam = 1.0 / (1.0 + 0.25 * 0.25);
  CHECK(disk.inner(u, v2(1, 0), v2(1, 0)) == doctest::Approx(lam * lam).epsilon(1e-15));
  CHECK(disk.raise_differential(u, v2(1, 0)).isApprox(v2(1.0 / (lam * lam), 0), 1e-13));

  const Vec y = v2(0.32, 0.38);
  const Vec w = v2(0.7, -0.2);
  const Vec wt = disk.transport(u, y, w);
  CHECK(disk.norm(y, wt) == doctest::Approx(disk.norm(u, w)).epsilon(1e-14));

  // Radial geodesics from the chart center have arclength s = 2 atan(r/2);
  // the second-order retraction must agree to cubic order.
  for (double s : {0.01, 0.1}) {
    const Vec end = disk.exp(v2(0, 0), v2(s, 0));
    const double exact = 2.0 * std::tan(s / 2.0);
    CHECK(std::abs(end[0] - exact) < 0.2 * s * s * s);
    CHECK(std::abs(end[1]) < 1e-15);
  }

  // Step-scale distance agrees with the metric length of the connecting step.
  const Vec v = v2(0.006, -0.008);
  CHECK(disk.dist(u, disk.exp(u, v)) ==
        doctest::Approx(disk.norm(u, v)).epsilon(1e-3));
}

TEST_CASE("bump factor is flat inside its plateau and outside its support") {
  const Vec c = v2(0.5, 0.0);
  ConformalDisk disk(ConformalFactor::bump(0.3, c, 0.2, 0.5), 2.0);
  CHECK(disk.gauss_curvature(c) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(disk.gauss_curvature(v2(0.6, 0.1)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(disk.factor().value(c) == doctest::Approx(std::exp(0.3)).epsilon(1e-14));
  CHECK(disk.gauss_curvature(v2(1.2, 0.0)) == doctest::Approx(0.0).epsilon(1e-14));
  // The ramp region carries nonzero curvature.
  CHECK(std::abs(disk.gauss_curvature(v2(0.85, 0.0))) > 1e-3);

  // Analytic ramp derivatives agree with finite differences of the log.
  ConformalFactor full = ConformalFactor::bump(0.3, c, 0.2, 0.5);
  ConformalFactor fd_only;
  fd_only.log_value = full.log_value;
  const Vec probe = v2(0.85, 0.05);
  CHECK(full.grad_log_at(probe).isApprox(fd_only.grad_log_at(probe), 1e-6));
  CHECK(full.laplacian_log_at(probe) ==
        doctest::Approx(fd_only.laplacian_log_at(probe)).epsilon(1e-4));
}

TEST_CASE("probe functions certify on their acceptance probes") {
  {
    Sphere s(2);
    const auto rep = certify_probe_function(s, TestFunction::coordinate(2), v3(1, 0, 0));
    CHECK(rep.ok);
    CHECK(rep.grad_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    Sphere s(3);
    Vec probe = Vec::Zero(4);
    probe[0] = 1.0;
    const auto rep = certify_probe_function(s, TestFunction::coordinate(1), probe);
    CHECK(rep.ok);
  }
  {
    HalfSpace hs(2);
    const auto rep = certify_probe_function(hs, TestFunction::coordinate(0), v2(1, 0));
    CHECK(rep.ok);
    CHECK(rep.boundary_normal_component == doctest::Approx(0.0));
  }
  {
    ConformalDisk disk(ConformalFactor::stereographic(), 2.0);
    const auto f = TestFunction::windowed_coordinate(0, 1.0, Vec::Zero(2), 0.5, 0.9);
    const auto rep = certify_probe_function(disk, f, v2(0, 0));
    CHECK(rep.ok);
    CHECK(rep.grad_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("certification flags wrong scales and boundary-normal gradients") {
  Sphere s(2);
  const auto bad = certify_probe_function(s, TestFunction::coordinate(2, 1.3), v3(1, 0, 0));
  CHECK(!bad.ok);

  HalfSpace hs(2);
  const auto leaky = certify_probe_function(hs, TestFunction::coordinate(1), v2(1, 0));
  CHECK(!leaky.ok);
  CHECK(std::abs(leaky.boundary_normal_component) == doctest::Approx(1.0));
}

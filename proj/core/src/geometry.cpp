#include "ricprobe/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ricprobe/smoothing.hpp"
#include "ricprobe/test_function.hpp"

namespace ricprobe {

namespace {

constexpr double kTiny = 1e-14;
constexpr double kFdGradStep = 1e-6;

std::string format_name(const char* fmt_str, double arg) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt_str, arg);
  return buf;
}

}  // namespace

// ---- DriftField -------------------------------------------------------------

DriftField DriftField::zero() { return {}; }

DriftField DriftField::constant(const Vec& z0) {
  DriftField z;
  const int n = static_cast<int>(z0.size());
  z.value = [z0](const Vec&) { return z0; };
  z.flat_jacobian = [n](const Vec&) { return Mat(Mat::Zero(n, n)); };
  z.label = "constant";
  return z;
}

DriftField DriftField::radial_gradient(double coeff, int power, const Vec& center) {
  if (power != 2 && power != 4) throw std::invalid_argument("radial_gradient: power must be 2 or 4");
  DriftField z;
  const int n = static_cast<int>(center.size());
  if (power == 2) {
    z.value = [coeff, center](const Vec& x) { return Vec(-coeff * (x - center)); };
    z.flat_jacobian = [coeff, n](const Vec&) { return Mat(-coeff * Mat::Identity(n, n)); };
  } else {
    z.value = [coeff, center](const Vec& x) {
      Vec r = x - center;
      return Vec(-coeff * r.squaredNorm() * r);
    };
    z.flat_jacobian = [coeff, center, n](const Vec& x) {
      Vec r = x - center;
      Mat j = -coeff * (r.squaredNorm() * Mat::Identity(n, n) + 2.0 * r * r.transpose());
      return j;
    };
  }
  z.label = format_name(power == 2 ? "quadratic_well(%g)" : "quartic_well(%g)", coeff);
  return z;
}

DriftField DriftField::windowed_radial(double coeff, int sign, const Vec& center,
                                       double r_in, double r_out) {
  DriftField z;
  const int n = static_cast<int>(center.size());
  const double s = sign >= 0 ? 1.0 : -1.0;
  z.value = [coeff, s, center, r_in, r_out](const Vec& x) {
    Vec r = x - center;
    return Vec(s * coeff * radial_window(r.norm(), r_in, r_out) * r);
  };
  z.flat_jacobian = [coeff, s, center, r_in, r_out, n](const Vec& x) {
    Vec r = x - center;
    const double rn = r.norm();
    Mat j = radial_window(rn, r_in, r_out) * Mat::Identity(n, n);
    if (rn > kTiny) j += (radial_window_deriv(rn, r_in, r_out) / rn) * r * r.transpose();
    return Mat(s * coeff * j);
  };
  z.label = format_name(s > 0 ? "windowed_outward(%g)" : "windowed_inward(%g)", coeff);
  return z;
}

// ---- Manifold base ----------------------------------------------------------

Reflected Manifold::reflect(const Vec&) const {
  throw std::logic_error(name() + ": reflect called on a manifold without boundary");
}

Mat Manifold::second_form(const Vec&, const Mat& frame) const {
  return Mat::Zero(frame.cols(), frame.cols());
}

Mat Manifold::orthonormal_frame(const Vec& x) const {
  const int n = ambient_dim();
  const int d = dim();
  Mat frame(n, d);
  int col = 0;
  for (int k = 0; k < n && col < d; ++k) {
    Vec cand = tangent_project(x, Vec::Unit(n, k));
    for (int j = 0; j < col; ++j) cand -= inner(x, frame.col(j), cand) * frame.col(j);
    const double len = norm(x, cand);
    if (len > 1e-6) frame.col(col++) = cand / len;
  }
  if (col != d) throw std::runtime_error(name() + ": failed to build a full tangent frame");
  return frame;
}

Mat Manifold::frame_gram(const Vec& x, const Mat& frame) const {
  const int d = static_cast<int>(frame.cols());
  Mat g(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) g(a, b) = g(b, a) = inner(x, frame.col(a), frame.col(b));
  return g;
}

Vec Manifold::frame_components(const Vec& x, const Mat& frame, const Vec& v) const {
  const int d = static_cast<int>(frame.cols());
  Vec c(d);
  for (int a = 0; a < d; ++a) c[a] = inner(x, frame.col(a), v);
  return c;
}

void Manifold::orthonormalize(const Vec& x, Mat& frame) const {
  const int d = static_cast<int>(frame.cols());
  for (int a = 0; a < d; ++a) {
    Vec col = tangent_project(x, frame.col(a));
    for (int j = 0; j < a; ++j) col -= inner(x, frame.col(j), col) * frame.col(j);
    const double len = norm(x, col);
    if (len < 1e-10) throw std::runtime_error(name() + ": frame degenerated during transport");
    frame.col(a) = col / len;
  }
}

Mat Manifold::transport_frame(const Vec& x, const Vec& y, const Mat& frame) const {
  Mat out(frame.rows(), frame.cols());
  for (int a = 0; a < frame.cols(); ++a) out.col(a) = transport(x, y, frame.col(a));
  orthonormalize(y, out);
  return out;
}

Vec Manifold::drift_value(const Vec& x) const {
  if (!has_drift()) return Vec::Zero(ambient_dim());
  return tangent_project(x, drift_.value(x));
}

Vec Manifold::drift_covariant_deriv(const Vec& x, const Vec& w) const {
  if (!has_drift()) return Vec::Zero(ambient_dim());
  const double len = norm(x, w);
  if (len < kTiny) return Vec::Zero(ambient_dim());
  const Vec u = w / len;
  const double h = kFdHessianStep;
  const Vec yp = exp(x, h * u);
  const Vec ym = exp(x, -h * u);
  const Vec zp = transport(yp, x, drift_value(yp));
  const Vec zm = transport(ym, x, drift_value(ym));
  return (len / (2.0 * h)) * (zp - zm);
}

Mat Manifold::ricci_z(const Vec& x, const Mat& frame) const {
  Mat r = ricci(x, frame);
  if (!has_drift()) return r;
  const int d = static_cast<int>(frame.cols());
  for (int a = 0; a < d; ++a) {
    const Vec dz = drift_covariant_deriv(x, frame.col(a));
    for (int b = 0; b < d; ++b) r(a, b) -= inner(x, dz, frame.col(b));
  }
  return r;
}

double Manifold::ricci_z_norm(const Vec& x) const {
  const Mat frame = orthonormal_frame(x);
  const Mat r = ricci_z(x, frame);
  const Mat sym = 0.5 * (r + r.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// ---- Sphere -----------------------------------------------------------------

Sphere::Sphere(int d) : d_(d) {
  if (d < 1 || d + 1 > kMaxAmbientDim) throw std::invalid_argument("sphere: unsupported dimension");
}

std::string Sphere::name() const { return "sphere(" + std::to_string(d_) + ")"; }

double Sphere::residual(const Vec& x) const { return std::abs(x.norm() - 1.0); }

Vec Sphere::project(const Vec& x) const { return x / x.norm(); }

Vec Sphere::tangent_project(const Vec& x, const Vec& v) const { return v - v.dot(x) * x; }

Vec Sphere::exp(const Vec& x, const Vec& v) const {
  const double len = v.norm();
  if (len < kTiny) return x;
  Vec y = std::cos(len) * x + (std::sin(len) / len) * v;
  return y / y.norm();
}

Vec Sphere::transport(const Vec& x, const Vec& y, const Vec& w) const {
  const double c = x.dot(y);
  Vec e = y - c * x;
  const double elen = e.norm();
  if (elen < kTiny) return tangent_project(y, w);
  e /= elen;
  const double s = elen;  // sin(theta) for unit x, y
  const double wx = w.dot(x);
  const double we = w.dot(e);
  return w + (c - 1.0) * (wx * x + we * e) + s * (wx * e - we * x);
}

double Sphere::dist(const Vec& x, const Vec& y) const {
  const double half_chord = 0.5 * (x - y).norm();
  return 2.0 * std::asin(std::min(1.0, half_chord));
}

Vec Sphere::dist_gradient(const Vec& x0, const Vec& y) const {
  const double c = x0.dot(y);
  Vec e = x0 - c * y;
  const double elen = e.norm();
  if (elen < kTiny) return Vec::Zero(y.size());
  // Unit tangent at y pointing away from x0 along the connecting geodesic.
  return -e / elen;
}

Mat Sphere::ricci(const Vec& x, const Mat& frame) const {
  return (d_ - 1.0) * frame_gram(x, frame);
}

// ---- SphericalCap -----------------------------------------------------------

SphericalCap::SphericalCap(double theta0) : Sphere(2), theta0_(theta0) {
  if (!(theta0 > 0.0 && theta0 < kPi)) throw std::invalid_argument("spherical_cap: theta0 out of range");
}

std::string SphericalCap::name() const { return format_name("spherical_cap(%.6g)", theta0_); }

BoundaryData SphericalCap::boundary(const Vec& x) const {
  BoundaryData b;
  const double theta = std::acos(std::clamp(x[2], -1.0, 1.0));
  b.dist = theta0_ - theta;
  const double rho = std::hypot(x[0], x[1]);
  if (rho > kTiny) {
    b.normal.resize(3);
    const double ct = x[2];
    b.normal << -ct * x[0] / rho, -ct * x[1] / rho, std::sin(theta);
    b.has_normal = true;
  }
  return b;
}

Reflected SphericalCap::reflect(const Vec& exterior) const {
  const double theta = std::acos(std::clamp(exterior[2], -1.0, 1.0));
  const double rho = std::hypot(exterior[0], exterior[1]);
  double cphi = 1.0;
  double sphi = 0.0;
  if (rho > kTiny) {
    cphi = exterior[0] / rho;
    sphi = exterior[1] / rho;
  }
  const double folded = 2.0 * theta0_ - theta;
  Reflected r;
  r.point.resize(3);
  r.point << std::sin(folded) * cphi, std::sin(folded) * sphi, std::cos(folded);
  r.push = 2.0 * (theta - theta0_);
  return r;
}

Mat SphericalCap::second_form(const Vec& x, const Mat& frame) const {
  const int d = static_cast<int>(frame.cols());
  const BoundaryData b = boundary(x);
  if (!b.has_normal) return Mat::Zero(d, d);
  const double k = 1.0 / std::tan(theta0_);
  Mat out(d, d);
  for (int a = 0; a < d; ++a) {
    const double na = frame.col(a).dot(b.normal);
    for (int bb = a; bb < d; ++bb) {
      const double nb = frame.col(bb).dot(b.normal);
      out(a, bb) = out(bb, a) = k * (frame.col(a).dot(frame.col(bb)) - na * nb);
    }
  }
  return out;
}

// ---- HalfSpace --------------------------------------------------------------

HalfSpace::HalfSpace(int d) : d_(d) {
  if (d < 1 || d > kMaxAmbientDim) throw std::invalid_argument("half_space: unsupported dimension");
}

std::string HalfSpace::name() const { return "half_space(" + std::to_string(d_) + ")"; }

double HalfSpace::residual(const Vec&) const { return 0.0; }

Vec HalfSpace::project(const Vec& x) const { return x; }

Vec HalfSpace::tangent_project(const Vec&, const Vec& v) const { return v; }

Vec HalfSpace::exp(const Vec& x, const Vec& v) const { return x + v; }

Vec HalfSpace::transport(const Vec&, const Vec&, const Vec& w) const { return w; }

double HalfSpace::dist(const Vec& x, const Vec& y) const { return (x - y).norm(); }

Vec HalfSpace::dist_gradient(const Vec& x0, const Vec& y) const {
  Vec diff = y - x0;
  const double len = diff.norm();
  if (len < kTiny) return Vec::Zero(y.size());
  return diff / len;
}

BoundaryData HalfSpace::boundary(const Vec& x) const {
  BoundaryData b;
  b.dist = x[d_ - 1];
  b.normal = Vec::Unit(d_, d_ - 1);
  b.has_normal = true;
  return b;
}

Reflected HalfSpace::reflect(const Vec& exterior) const {
  Reflected r;
  r.point = exterior;
  r.point[d_ - 1] = -exterior[d_ - 1];
  r.push = 2.0 * std::abs(exterior[d_ - 1]);
  return r;
}

Mat HalfSpace::second_form(const Vec&, const Mat& frame) const {
  return Mat::Zero(frame.cols(), frame.cols());
}

Mat HalfSpace::ricci(const Vec&, const Mat& frame) const {
  return Mat::Zero(frame.cols(), frame.cols());
}

Vec HalfSpace::drift_covariant_deriv(const Vec& x, const Vec& w) const {
  if (!has_drift()) return Vec::Zero(d_);
  if (drift_.flat_jacobian) return drift_.flat_jacobian(x) * w;
  return Manifold::drift_covariant_deriv(x, w);
}

// ---- ConformalFactor --------------------------------------------------------

Vec ConformalFactor::grad_log_at(const Vec& u) const {
  if (is_flat()) return Vec::Zero(u.size());
  if (grad_log) return grad_log(u);
  const double h = kFdHessianStep;
  Vec g(u.size());
  Vec p = u;
  for (int i = 0; i < u.size(); ++i) {
    p[i] = u[i] + h;
    const double fp = log_value(p);
    p[i] = u[i] - h;
    const double fm = log_value(p);
    p[i] = u[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double ConformalFactor::laplacian_log_at(const Vec& u) const {
  if (is_flat()) return 0.0;
  if (laplacian_log) return laplacian_log(u);
  const double h = kFdHessianStep;
  const double f0 = log_value(u);
  double acc = 0.0;
  Vec p = u;
  for (int i = 0; i < u.size(); ++i) {
    p[i] = u[i] + h;
    const double fp = log_value(p);
    p[i] = u[i] - h;
    const double fm = log_value(p);
    p[i] = u[i];
    acc += (fp - 2.0 * f0 + fm) / (h * h);
  }
  return acc;
}

ConformalFactor ConformalFactor::flat() { return {}; }

ConformalFactor ConformalFactor::bump(double a, const Vec& center, double r_in, double r_out) {
  ConformalFactor f;
  f.log_value = [a, center, r_in, r_out](const Vec& u) {
    return a * radial_window((u - center).norm(), r_in, r_out);
  };
  f.grad_log = [a, center, r_in, r_out](const Vec& u) {
    Vec r = u - center;
    const double rn = r.norm();
    if (rn < kTiny) return Vec(Vec::Zero(u.size()));
    return Vec((a * radial_window_deriv(rn, r_in, r_out) / rn) * r);
  };
  f.laplacian_log = [a, center, r_in, r_out](const Vec& u) {
    const double rn = (u - center).norm();
    if (rn < kTiny) return 0.0;
    const double n1 = static_cast<double>(u.size()) - 1.0;
    return a * (radial_window_second(rn, r_in, r_out) +
                n1 * radial_window_deriv(rn, r_in, r_out) / rn);
  };
  f.label = format_name("bump(%.3g)", a);
  return f;
}

ConformalFactor ConformalFactor::stereographic() {
  ConformalFactor f;
  f.log_value = [](const Vec& u) { return -std::log1p(0.25 * u.squaredNorm()); };
  f.grad_log = [](const Vec& u) {
    const double lam = 1.0 / (1.0 + 0.25 * u.squaredNorm());
    return Vec(-0.5 * lam * u);
  };
  f.laplacian_log = [](const Vec& u) {
    const double lam = 1.0 / (1.0 + 0.25 * u.squaredNorm());
    return -lam * lam;
  };
  f.label = "stereographic";
  return f;
}

ConformalFactor ConformalFactor::product(ConformalFactor f, ConformalFactor g) {
  if (f.is_flat()) return g;
  if (g.is_flat()) return f;
  ConformalFactor out;
  out.log_value = [f, g](const Vec& u) { return f.log_at(u) + g.log_at(u); };
  out.grad_log = [f, g](const Vec& u) { return Vec(f.grad_log_at(u) + g.grad_log_at(u)); };
  out.laplacian_log = [f, g](const Vec& u) {
    return f.laplacian_log_at(u) + g.laplacian_log_at(u);
  };
  out.label = f.label + "*" + g.label;
  return out;
}

// ---- ConformalDisk ----------------------------------------------------------

ConformalDisk::ConformalDisk(ConformalFactor lambda, double chart_radius)
    : lambda_(std::move(lambda)), chart_radius_(chart_radius) {
  if (!(chart_radius > 0.0)) throw std::invalid_argument("conformal_disk: chart radius must be positive");
}

std::string ConformalDisk::name() const { return "conformal_disk(" + lambda_.label + ")"; }

double ConformalDisk::residual(const Vec&) const { return 0.0; }

Vec ConformalDisk::project(const Vec& x) const { return x; }

Vec ConformalDisk::tangent_project(const Vec&, const Vec& v) const { return v; }

double ConformalDisk::inner(const Vec& x, const Vec& a, const Vec& b) const {
  const double lam = lambda_.value(x);
  return lam * lam * a.dot(b);
}

Vec ConformalDisk::raise_differential(const Vec& x, const Vec& df) const {
  const double lam = lambda_.value(x);
  return df / (lam * lam);
}

Vec ConformalDisk::exp(const Vec& x, const Vec& v) const {
  // Second-order retraction from the conformal Christoffel symbols.
  const Vec g = lambda_.grad_log_at(x);
  return x + v - v.dot(g) * v + 0.5 * v.squaredNorm() * g;
}

Vec ConformalDisk::transport(const Vec& x, const Vec& y, const Vec& w) const {
  const double wlen = norm(x, w);
  if (wlen < kTiny) return w;
  const Vec dx = y - x;
  const Vec g = lambda_.grad_log_at(0.5 * (x + y));
  Vec out = w - (dx.dot(g) * w + w.dot(g) * dx - dx.dot(w) * g);
  const double olen = norm(y, out);
  if (olen < kTiny) return out;
  return (wlen / olen) * out;  // transport is an isometry; restore the length exactly
}

double ConformalDisk::dist(const Vec& x, const Vec& y) const {
  // Midpoint-factor approximation, second order in the separation. All
  // consumers query at step scale.
  return lambda_.value(0.5 * (x + y)) * (y - x).norm();
}

Vec ConformalDisk::dist_gradient(const Vec& x0, const Vec& y) const {
  Vec diff = y - x0;
  const double len = diff.norm();
  if (len < kTiny) return Vec::Zero(y.size());
  return diff / (len * lambda_.value(y));
}

Mat ConformalDisk::ricci(const Vec& x, const Mat& frame) const {
  return gauss_curvature(x) * frame_gram(x, frame);
}

double ConformalDisk::gauss_curvature(const Vec& x) const {
  const double lam = lambda_.value(x);
  return -lambda_.laplacian_log_at(x) / (lam * lam);
}

// ---- factories --------------------------------------------------------------

std::unique_ptr<Manifold> make_sphere(int d) { return std::make_unique<Sphere>(d); }

std::unique_ptr<Manifold> make_spherical_cap(double theta0) {
  return std::make_unique<SphericalCap>(theta0);
}

std::unique_ptr<Manifold> make_half_space(int d) { return std::make_unique<HalfSpace>(d); }

std::unique_ptr<Manifold> make_conformal_disk(ConformalFactor lambda, double chart_radius) {
  return std::make_unique<ConformalDisk>(std::move(lambda), chart_radius);
}

// ---- TestFunction -----------------------------------------------------------

Vec TestFunction::differential_at(const Vec& x) const {
  if (differential) return differential(x);
  const double h = kFdGradStep;
  Vec g(x.size());
  Vec p = x;
  for (int i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double fp = value(p);
    p[i] = x[i] - h;
    const double fm = value(p);
    p[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec TestFunction::gradient(const Manifold& m, const Vec& x) const {
  return m.tangent_project(x, m.raise_differential(x, differential_at(x)));
}

double TestFunction::gradient_norm(const Manifold& m, const Vec& x) const {
  return m.norm(x, gradient(m, x));
}

TestFunction TestFunction::coordinate(int k, double scale) {
  TestFunction f;
  f.value = [k, scale](const Vec& x) { return scale * x[k]; };
  f.differential = [k, scale](const Vec& x) { return Vec(scale * Vec::Unit(x.size(), k)); };
  char buf[48];
  if (scale == 1.0)
    std::snprintf(buf, sizeof(buf), "x%d", k + 1);
  else
    std::snprintf(buf, sizeof(buf), "%g*x%d", scale, k + 1);
  f.label = buf;
  return f;
}

TestFunction TestFunction::windowed_coordinate(int k, double scale, const Vec& center,
                                               double r_in, double r_out) {
  TestFunction f;
  f.value = [k, scale, center, r_in, r_out](const Vec& u) {
    return scale * (u[k] - center[k]) * radial_window((u - center).norm(), r_in, r_out);
  };
  f.differential = [k, scale, center, r_in, r_out](const Vec& u) {
    Vec r = u - center;
    const double rn = r.norm();
    Vec g = radial_window(rn, r_in, r_out) * Vec::Unit(u.size(), k);
    if (rn > kTiny) g += (r[k] * radial_window_deriv(rn, r_in, r_out) / rn) * r;
    return Vec(scale * g);
  };
  char buf[48];
  std::snprintf(buf, sizeof(buf), "windowed_u%d", k + 1);
  f.label = buf;
  return f;
}

TestFunction TestFunction::linear(const Vec& a, double scale) {
  TestFunction f;
  f.value = [a, scale](const Vec& x) { return scale * a.dot(x); };
  f.differential = [a, scale](const Vec&) { return Vec(scale * a); };
  f.label = "linear";
  return f;
}

CertifyReport certify_probe_function(const Manifold& m, const TestFunction& f,
                                     const Vec& probe, double h, double grad_tol,
                                     double hess_tol) {
  CertifyReport rep;
  const Vec x = m.project(probe);
  rep.grad_norm = f.gradient_norm(m, x);

  const Mat frame = m.orthonormal_frame(x);
  const int d = m.dim();
  const double f0 = f(x);
  auto second_diff = [&](const Vec& v) {
    return (f(m.exp(x, h * v)) - 2.0 * f0 + f(m.exp(x, -h * v))) / (h * h);
  };
  double hmax = 0.0;
  for (int a = 0; a < d; ++a) hmax = std::max(hmax, std::abs(second_diff(frame.col(a))));
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      const Vec v = (frame.col(a) + frame.col(b)) / std::sqrt(2.0);
      hmax = std::max(hmax, std::abs(second_diff(v)));
    }
  rep.hess_max = hmax;

  if (m.has_boundary()) {
    const BoundaryData bd = m.boundary(x);
    if (bd.has_normal && bd.dist < 10.0 * h) {
      const Vec gr = f.gradient(m, x);
      const double nn = m.norm(x, bd.normal);
      if (nn > kTiny) rep.boundary_normal_component = m.inner(x, gr, bd.normal) / nn;
    }
  }

  rep.ok = std::abs(rep.grad_norm - 1.0) <= grad_tol && rep.hess_max <= hess_tol &&
           std::abs(rep.boundary_normal_component) <= hess_tol;
  return rep;
}

}  // namespace ricprobe

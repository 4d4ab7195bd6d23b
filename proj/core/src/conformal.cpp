#include "ricprobe/conformal.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ricprobe/manifolds.hpp"
#include "ricprobe/rng.hpp"

namespace ricprobe {

namespace {

constexpr double kTiny = 1e-14;

double sym_spectral_norm(const Mat& a) {
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Transport finite difference of a field along the geodesic through x.
Vec covariant_fd(const Manifold& m, const Vec& x, const Vec& along, const VectorField& field,
                 double h) {
  const double len = m.norm(x, along);
  if (len < kTiny) return Vec::Zero(m.ambient_dim());
  const Vec u = along / len;
  const Vec yp = m.exp(x, h * u);
  const Vec ym = m.exp(x, -h * u);
  const Vec fp = m.transport(yp, x, m.tangent_project(yp, field(yp)));
  const Vec fm = m.transport(ym, x, m.tangent_project(ym, field(ym)));
  return (len / (2.0 * h)) * (fp - fm);
}

// Deformed covariant derivative of a field along a tangent vector, given the
// ambient gradient of log phi at x.
Vec deformed_deriv(const Manifold& m, const Vec& x, const Vec& along, const VectorField& field,
                   const Vec& grad_log, double h) {
  const Vec base = covariant_fd(m, x, along, field, h);
  const Vec x0 = m.tangent_project(x, along);
  const Vec y0 = m.tangent_project(x, field(x));
  return base - m.inner(x, x0, grad_log) * y0 - m.inner(x, y0, grad_log) * x0 +
         m.inner(x, x0, y0) * grad_log;
}

VectorField scaled_drift_field(const Manifold& m, const ConformalFactor& phi) {
  return [&m, &phi](const Vec& y) { return Vec(std::exp(phi.log_at(y)) * m.drift_value(y)); };
}

std::optional<Vec> to_boundary(const Manifold& m, Vec x) {
  for (int it = 0; it < 4; ++it) {
    const BoundaryData bd = m.boundary(x);
    if (!bd.has_normal) return std::nullopt;
    if (std::abs(bd.dist) <= 1e-9) return x;
    x = m.project(x - bd.dist * bd.normal);
  }
  if (std::abs(m.boundary(x).dist) <= 1e-8) return x;
  return std::nullopt;
}

struct SupTrack {
  double value = 0.0;
  Vec argmax;
  std::size_t n = 0;

  void feed(double v, const Vec& x) {
    if (n == 0 || v > value) {
      value = v;
      argmax = x;
    }
    ++n;
  }
};

void scan_grid(const Manifold& m, const ConformalFactor& phi, const ConformalGrid& grid,
               int n_axis, SupTrack& interior, SupTrack& boundary) {
  const int n = m.ambient_dim();
  std::vector<double> ticks(static_cast<std::size_t>(n_axis));
  for (int i = 0; i < n_axis; ++i)
    ticks[static_cast<std::size_t>(i)] =
        n_axis > 1 ? -grid.radius + 2.0 * grid.radius * i / (n_axis - 1) : 0.0;

  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vec raw = grid.center;
    for (int k = 0; k < n; ++k) raw[k] += ticks[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    const Vec x = m.project(raw);
    const bool inside = !m.has_boundary() || m.boundary(x).dist >= -1e-12;
    if (inside && std::exp(phi.log_at(x)) > grid.phi_floor)
      interior.feed(transformed_curvature(m, phi, x).norm, x);

    if (m.has_boundary()) {
      if (auto y = to_boundary(m, x); y && std::exp(phi.log_at(*y)) > grid.phi_floor)
        boundary.feed(transformed_second_form(m, phi, *y).norm, *y);
    }

    int k = 0;
    for (; k < n; ++k) {
      if (++idx[static_cast<std::size_t>(k)] < n_axis) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
    if (k == n) break;
  }
}

Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
  return c;
}

}  // namespace

ConformalScalars conformal_scalars(const Manifold& m, const ConformalFactor& phi, const Vec& x,
                                   const Mat& frame, double h) {
  const int d = static_cast<int>(frame.cols());
  ConformalScalars s;
  s.log_phi = phi.log_at(x);
  s.phi = std::exp(s.log_phi);

  if (phi.grad_log) {
    s.grad_log = m.raise_differential(x, phi.grad_log(x));
    s.grad_log_frame = m.frame_components(x, frame, s.grad_log);
  } else {
    s.grad_log_frame.resize(d);
    for (int a = 0; a < d; ++a) {
      const double lp = phi.log_at(m.exp(x, h * frame.col(a)));
      const double lm = phi.log_at(m.exp(x, -h * frame.col(a)));
      s.grad_log_frame[a] = (lp - lm) / (2.0 * h);
    }
    s.grad_log = frame * s.grad_log_frame;
  }
  s.grad_log_sq = s.grad_log_frame.squaredNorm();

  const double l0 = s.log_phi;
  auto second = [&](const Vec& v) {
    return (phi.log_at(m.exp(x, h * v)) - 2.0 * l0 + phi.log_at(m.exp(x, -h * v))) / (h * h);
  };
  s.hess_log = Mat::Zero(d, d);
  for (int a = 0; a < d; ++a) s.hess_log(a, a) = second(frame.col(a));
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      const Vec v = (frame.col(a) + frame.col(b)) / std::sqrt(2.0);
      s.hess_log(a, b) = s.hess_log(b, a) =
          second(v) - 0.5 * s.hess_log(a, a) - 0.5 * s.hess_log(b, b);
    }
  s.lap_log = s.hess_log.trace();
  return s;
}

double conformal_inner(const Manifold& m, const ConformalFactor& phi, const Vec& x, const Vec& a,
                       const Vec& b) {
  const double p = std::exp(phi.log_at(x));
  return m.inner(x, a, b) / (p * p);
}

Mat direction_frame(const Manifold& m, const Vec& x, const Vec& first) {
  const int d = m.dim();
  Vec lead = m.tangent_project(x, first);
  const double len = m.norm(x, lead);
  if (len < 1e-8) throw std::invalid_argument("direction_frame: direction is not tangent");
  lead /= len;

  const Mat base = m.orthonormal_frame(x);
  Mat frame(m.ambient_dim(), d);
  frame.col(0) = lead;
  int col = 1;
  for (int k = 0; k < d && col < d; ++k) {
    Vec cand = base.col(k);
    for (int j = 0; j < col; ++j) cand -= m.inner(x, frame.col(j), cand) * frame.col(j);
    const double cl = m.norm(x, cand);
    if (cl > 1e-6) frame.col(col++) = cand / cl;
  }
  if (col != d) throw std::runtime_error("direction_frame: failed to complete the frame");
  return frame;
}

Vec transformed_connection(const Manifold& m, const ConformalFactor& phi, const Vec& x,
                           const VectorField& X, const VectorField& Y, double h) {
  const Mat frame = m.orthonormal_frame(x);
  const ConformalScalars s = conformal_scalars(m, phi, x, frame, h);
  return deformed_deriv(m, x, m.tangent_project(x, X(x)), Y, s.grad_log, h);
}

ConformalCurvature transformed_curvature(const Manifold& m, const ConformalFactor& phi,
                                         const Vec& x, const Mat& frame, double h) {
  const int d = static_cast<int>(frame.cols());
  ConformalCurvature out;
  out.frame = frame;
  out.scalars = conformal_scalars(m, phi, x, frame, h);
  const ConformalScalars& s = out.scalars;

  Mat form = m.ricci(x, frame);
  if (d != 2)
    form += (d - 2.0) * (s.hess_log + s.grad_log_frame * s.grad_log_frame.transpose());
  form += (s.lap_log - (d - 2.0) * s.grad_log_sq) * Mat::Identity(d, d);
  out.ric = s.phi * s.phi * form;

  out.drift_grad = Mat::Zero(d, d);
  if (m.has_drift()) {
    const VectorField v = scaled_drift_field(m, phi);
    for (int a = 0; a < d; ++a) {
      const Vec dv = deformed_deriv(m, x, frame.col(a), v, s.grad_log, h);
      for (int b = 0; b < d; ++b) out.drift_grad(a, b) = m.inner(x, dv, frame.col(b));
    }
  }
  out.norm = sym_spectral_norm(out.ric - out.drift_grad);
  return out;
}

ConformalCurvature transformed_curvature(const Manifold& m, const ConformalFactor& phi,
                                         const Vec& x, double h) {
  return transformed_curvature(m, phi, x, m.orthonormal_frame(x), h);
}

ConformalBending transformed_second_form(const Manifold& m, const ConformalFactor& phi,
                                         const Vec& x, double h) {
  const BoundaryData bd = m.boundary(x);
  if (!bd.has_normal || std::abs(bd.dist) > 1e-7)
    throw std::invalid_argument("transformed second form needs a boundary point");

  ConformalBending out;
  out.frame = m.orthonormal_frame(x);
  const int d = static_cast<int>(out.frame.cols());

  if (phi.grad_log) {
    out.normal_log_rate = phi.grad_log(x).dot(bd.normal);
  } else {
    const double l0 = phi.log_at(x);
    const double l1 = phi.log_at(m.exp(x, h * bd.normal));
    const double l2 = phi.log_at(m.exp(x, 2.0 * h * bd.normal));
    out.normal_log_rate = (-3.0 * l0 + 4.0 * l1 - l2) / (2.0 * h);
  }

  const double p = std::exp(phi.log_at(x));
  const Mat base = m.second_form(x, out.frame);
  Mat gram(d, d);
  for (int a = 0; a < d; ++a) {
    const Vec pa = out.frame.col(a) - m.inner(x, out.frame.col(a), bd.normal) * bd.normal;
    for (int b = a; b < d; ++b) {
      const Vec pb = out.frame.col(b) - m.inner(x, out.frame.col(b), bd.normal) * bd.normal;
      gram(a, b) = gram(b, a) = m.inner(x, pa, pb);
    }
  }
  out.form = p * (base + out.normal_log_rate * gram);

  if (d <= 1) return out;

  Mat sub(m.ambient_dim(), d - 1);
  int col = 0;
  for (int a = 0; a < d && col < d - 1; ++a) {
    Vec cand = out.frame.col(a) - m.inner(x, out.frame.col(a), bd.normal) * bd.normal;
    for (int j = 0; j < col; ++j) cand -= m.inner(x, sub.col(j), cand) * sub.col(j);
    const double cl = m.norm(x, cand);
    if (cl > 1e-8) sub.col(col++) = cand / cl;
  }
  if (col != d - 1) throw std::runtime_error("transformed second form: degenerate boundary frame");
  const Mat bsub = m.second_form(x, sub);
  out.norm = sym_spectral_norm(p * (bsub + out.normal_log_rate * Mat::Identity(d - 1, d - 1)));
  return out;
}

ConformalTensors conformal_tensors(const Manifold& m, const ConformalFactor& phi, const Vec& x,
                                   double h) {
  ConformalTensors out;
  out.curvature = transformed_curvature(m, phi, x, h);
  if (m.has_boundary()) {
    const BoundaryData bd = m.boundary(x);
    if (bd.has_normal && std::abs(bd.dist) <= 1e-7)
      out.bending = transformed_second_form(m, phi, x, h);
  }
  out.drift = m.has_drift() ? Vec(std::exp(phi.log_at(x)) * m.drift_value(x))
                            : Vec(Vec::Zero(m.ambient_dim()));
  return out;
}

ConformalManifold make_conformal_manifold(const Manifold& base, ConformalFactor phi,
                                          const ConformalGrid& grid) {
  if (grid.center.size() != base.ambient_dim())
    throw std::invalid_argument("conformal grid center has the wrong dimension");
  if (grid.n_per_axis < 2) throw std::invalid_argument("conformal grid needs at least two ticks");

  SupTrack coarse_i, coarse_b, fine_i, fine_b;
  scan_grid(base, phi, grid, grid.n_per_axis, coarse_i, coarse_b);
  scan_grid(base, phi, grid, 2 * grid.n_per_axis - 1, fine_i, fine_b);
  if (fine_i.n == 0) throw std::invalid_argument("conformal grid produced no admissible points");

  ConformalManifold out;
  out.base = &base;
  out.phi = phi;
  if (base.has_drift()) {
    const DriftField& z = base.drift();
    DriftField scaled;
    scaled.value = [phi, z](const Vec& y) { return Vec(std::exp(phi.log_at(y)) * z.value(y)); };
    scaled.label = "scaled(" + z.label + ")";
    out.drift = std::move(scaled);
  } else {
    out.drift = DriftField::zero();
  }
  out.curvature_sup = {fine_i.value, std::abs(fine_i.value - coarse_i.value), fine_i.argmax,
                       fine_i.n};
  if (fine_b.n > 0)
    out.bending_sup = {fine_b.value, std::abs(fine_b.value - coarse_b.value), fine_b.argmax,
                       fine_b.n};
  return out;
}

Mat chart_christoffel_fd(const ChartMetric& g, const Vec& u, int k, double h) {
  const int d = static_cast<int>(u.size());
  const Mat inv = g(u).inverse();
  std::vector<Mat> dg(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) {
    Vec up = u, um = u;
    up[l] += h;
    um[l] -= h;
    dg[static_cast<std::size_t>(l)] = (g(up) - g(um)) / (2.0 * h);
  }
  Mat out = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int l = 0; l < d; ++l)
        acc += inv(k, l) * (dg[static_cast<std::size_t>(i)](j, l) +
                            dg[static_cast<std::size_t>(j)](i, l) -
                            dg[static_cast<std::size_t>(l)](i, j));
      out(i, j) = 0.5 * acc;
    }
  return out;
}

Mat chart_ricci_fd(const ChartMetric& g, const Vec& u, double h) {
  const int d = static_cast<int>(u.size());
  auto gamma = [&](const Vec& v) {
    std::vector<Mat> gs(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) gs[static_cast<std::size_t>(k)] = chart_christoffel_fd(g, v, k, h);
    return gs;
  };
  const auto g0 = gamma(u);
  std::vector<std::vector<Mat>> dgamma(static_cast<std::size_t>(d));
  for (int mth = 0; mth < d; ++mth) {
    Vec up = u, um = u;
    up[mth] += h;
    um[mth] -= h;
    const auto gp = gamma(up);
    const auto gm = gamma(um);
    auto& slot = dgamma[static_cast<std::size_t>(mth)];
    slot.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      slot[static_cast<std::size_t>(k)] =
          (gp[static_cast<std::size_t>(k)] - gm[static_cast<std::size_t>(k)]) / (2.0 * h);
  }

  Mat ric = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int a = 0; a < d; ++a) {
        acc += dgamma[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)](i, j);
        acc -= dgamma[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)](a, j);
        for (int b = 0; b < d; ++b) {
          acc += g0[static_cast<std::size_t>(a)](a, b) * g0[static_cast<std::size_t>(b)](i, j);
          acc -= g0[static_cast<std::size_t>(a)](i, b) * g0[static_cast<std::size_t>(b)](a, j);
        }
      }
      ric(i, j) = acc;
    }
  return ric;
}

double chart_gauss_fd(const ChartMetric& g, const Vec& u, double h) {
  if (u.size() != 2) throw std::invalid_argument("gauss oracle is two-dimensional");
  const Mat ric = chart_ricci_fd(g, u, h);
  return 0.5 * (g(u).inverse() * ric).trace();
}

Vec SphereChart::point(const Vec& u) const {
  const double s = u.squaredNorm();
  return ((4.0 - s) * pole + 4.0 * (u[0] * axes.col(0) + u[1] * axes.col(1))) / (4.0 + s);
}

Mat SphereChart::jacobian(const Vec& u) const {
  const double s = u.squaredNorm();
  const Vec y = point(u);
  Mat j(3, 2);
  for (int i = 0; i < 2; ++i)
    j.col(i) = (-2.0 * u[i] * pole + 4.0 * axes.col(i)) / (4.0 + s) - (2.0 * u[i] / (4.0 + s)) * y;
  return j;
}

SphereChart sphere_chart(const Manifold& m, const Vec& p, const Vec& first_axis) {
  if (m.dim() != 2 || m.ambient_dim() != 3)
    throw std::invalid_argument("stereographic chart needs a 2-sphere");
  SphereChart ch;
  ch.pole = m.project(p);
  Vec a = m.tangent_project(ch.pole, first_axis);
  const double len = a.norm();
  if (len < 1e-8) throw std::invalid_argument("stereographic chart axis is not tangent");
  a /= len;
  ch.axes.resize(3, 2);
  ch.axes.col(0) = a;
  ch.axes.col(1) = cross3(ch.pole, a);
  return ch;
}

LocalityReport locality_experiment(const Manifold& m, const Vec& probe, const ConformalFactor& phi,
                                   const TestFunction& f, const LocalityOpts& opts) {
  const Vec p = m.project(probe);
  const Vec grad = f.gradient(m, p);
  if (std::abs(m.norm(p, grad) - 1.0) > 1e-6)
    throw std::invalid_argument("locality experiment needs a unit-gradient probe function");

  const Mat frame = direction_frame(m, p, grad);
  LocalityReport rep;
  rep.base_form = m.ricci_z(p, frame)(0, 0);
  const ConformalCurvature cc = transformed_curvature(m, phi, p, frame, opts.fd_step);
  rep.conformal_form = cc.ric(0, 0) - cc.drift_grad(0, 0);
  rep.predicted_shift = rep.conformal_form - rep.base_form;

  // Chart factor for the deformed metric phi^{-2} g and the drift map into
  // chart components.
  ConformalFactor chart_factor;
  std::function<Vec(const Vec&)> chart_drift;
  if (dynamic_cast<const Sphere*>(&m) && m.dim() == 2) {
    const SphereChart ch = sphere_chart(m, p, frame.col(0));
    const ConformalFactor round = ConformalFactor::stereographic();
    chart_factor.log_value = [round, phi, ch](const Vec& u) {
      return round.log_at(u) - phi.log_at(ch.point(u));
    };
    if (m.has_drift())
      chart_drift = [&m, phi, ch](const Vec& u) {
        const Vec y = ch.point(u);
        const Vec v = std::exp(phi.log_at(y)) * m.drift_value(y);
        const Mat j = ch.jacobian(u);
        const double lam = 4.0 / (4.0 + u.squaredNorm());
        Vec z(2);
        z << j.col(0).dot(v), j.col(1).dot(v);
        return Vec(z / (lam * lam));
      };
  } else if ((dynamic_cast<const HalfSpace*>(&m) != nullptr ||
              (dynamic_cast<const ConformalDisk*>(&m) != nullptr &&
               dynamic_cast<const ConformalDisk*>(&m)->factor().is_flat())) &&
             m.dim() == 2) {
    if (m.has_boundary() && m.boundary(p).dist <= opts.chart_radius)
      throw std::invalid_argument("chart radius reaches the boundary; move the probe or shrink the chart");
    const Mat axes = frame;
    chart_factor.log_value = [phi, p, axes](const Vec& u) {
      return -phi.log_at(p + u[0] * axes.col(0) + u[1] * axes.col(1));
    };
    if (m.has_drift())
      chart_drift = [&m, phi, p, axes](const Vec& u) {
        const Vec y = p + u[0] * axes.col(0) + u[1] * axes.col(1);
        const Vec v = std::exp(phi.log_at(y)) * m.drift_value(y);
        Vec z(2);
        z << axes.col(0).dot(v), axes.col(1).dot(v);
        return z;
      };
  } else {
    throw std::invalid_argument("locality experiment supports the 2-sphere and flat two-dimensional bases");
  }
  chart_factor.label = "chart(" + phi.label + ")";

  ConformalDisk disk(chart_factor, opts.chart_radius);
  if (chart_drift) {
    DriftField z;
    z.value = chart_drift;
    z.label = "chart-drift";
    disk.set_drift(std::move(z));
  }

  // Chart probe function: the first coordinate with the quadratic correction
  // that kills its covariant Hessian at the origin, scaled to unit gradient.
  const Vec origin = Vec::Zero(2);
  const double c = std::exp(chart_factor.log_at(origin));
  const Vec g0 = chart_factor.grad_log_at(origin);
  Mat quad(2, 2);
  quad << g0[0], g0[1], g0[1], -g0[0];
  TestFunction ft;
  ft.value = [c, quad](const Vec& u) { return c * (u[0] + 0.5 * u.dot(quad * u)); };
  ft.differential = [c, quad](const Vec& u) { return Vec(c * (Vec::Unit(2, 0) + quad * u)); };
  ft.label = "chart-axis";

  CurvatureOpts copts = opts.curvature;
  copts.master_seed = derive_stream_key(opts.curvature.master_seed, 1);

  rep.plain = ricci_estimate(m, p, f, opts.curvature);
  rep.conformal = ricci_estimate(disk, origin, ft, copts);
  rep.difference = rep.conformal.value - rep.plain.value;
  rep.combined_ci = rep.plain.ci + rep.conformal.ci;
  rep.agree = std::abs(rep.difference - rep.predicted_shift) <= 2.0 * rep.combined_ci;
  return rep;
}

}  // namespace ricprobe

#include "ricprobe/transport.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace ricprobe {

namespace {

double op_norm(const Mat& q) {
  return Eigen::JacobiSVD<Mat>(q).singularValues()[0];
}

}  // namespace

Mat normal_projector(const Manifold& m, const PathSample& path, int k) {
  const int d = path.d;
  const Vec xk = path.point(k);
  const BoundaryData bd = m.boundary(xk);
  if (!bd.has_normal) return Mat::Zero(d, d);
  Vec nu = m.frame_components(xk, path.frame_at(k), bd.normal);
  const double len = nu.norm();
  if (len < 1e-12) return Mat::Zero(d, d);
  nu /= len;
  return nu * nu.transpose();
}

Mat damping_factor(const Manifold& m, const PathSample& path, int k, double dt) {
  const int d = path.d;
  const Vec xk = path.point(k);
  const Mat uk = path.frame_at(k);
  Mat f = Mat::Identity(d, d) - dt * m.ricci_z(xk, uk);
  if (path.hit[k + 1]) {
    const Vec xn = path.point(k + 1);
    const Mat un = path.frame_at(k + 1);
    const Mat bend = m.second_form(xn, un);
    f = f * (Mat::Identity(d, d) - path.push[k + 1] * bend);
    f = f * (Mat::Identity(d, d) - normal_projector(m, path, k + 1));
  }
  return f;
}

void forward_damping(const Manifold& m, const PathSample& path, double dt,
                     std::vector<Mat>& out) {
  const int n = path.n_knots - 1;
  out.resize(path.n_knots);
  out[0] = Mat::Identity(path.d, path.d);
  for (int k = 0; k < n; ++k) out[k + 1] = out[k] * damping_factor(m, path, k, dt);
}

Mat endpoint_damping(const Manifold& m, const PathSample& path, double dt) {
  Mat q = Mat::Identity(path.d, path.d);
  for (int k = 0; k < path.n_knots - 1; ++k) q = q * damping_factor(m, path, k, dt);
  return q;
}

void backward_damping(const Manifold& m, const PathSample& path, double dt, int j,
                      std::vector<Mat>& out) {
  const int d = path.d;
  out.resize(j + 1);
  out[j] = Mat::Identity(d, d);
  for (int k = j - 1; k >= 0; --k) out[k] = damping_factor(m, path, k, dt) * out[k + 1];
  for (int k = 0; k <= j; ++k)
    if (path.hit[k])
      out[k] = (Mat::Identity(d, d) - normal_projector(m, path, k)) * out[k];
}

DampingBoundReport damping_bound_check(const Manifold& m, const PathSample& path, double dt,
                                       double ric_low, double bend_low, double tol,
                                       double proj_tol) {
  DampingBoundReport rep;
  Mat q = Mat::Identity(path.d, path.d);
  double lt = 0.0;
  for (int k = 0; k < path.n_knots; ++k) {
    if (k > 0) {
      q = q * damping_factor(m, path, k - 1, dt);
      lt += path.push[k];
    }
    const double bound = std::exp(-ric_low * k * dt - bend_low * lt);
    const double excess = (op_norm(q) - bound) / (1.0 + bound);
    if (excess > rep.max_excess) rep.max_excess = excess;
    if (excess > tol) rep.bound_ok = false;
    if (path.hit[k]) {
      const double proj = op_norm(Mat(q * normal_projector(m, path, k)));
      if (proj > rep.max_projected) rep.max_projected = proj;
      if (proj > proj_tol) rep.projection_ok = false;
    }
  }
  return rep;
}

}  // namespace ricprobe

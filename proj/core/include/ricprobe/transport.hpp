#pragma once

#include <vector>

#include "ricprobe/sim.hpp"

namespace ricprobe {

// Damping carried along a sampled path: left products of per-step factors
//
//   F_k = (I - R_k dt) (I - S_{k+1} dl_{k+1}) (I - 1hit(k+1) P_{k+1})
//
// with R_k the drift-corrected curvature tensor in the frame at the departure
// knot, S the boundary bending form and P the projector onto the frame
// components of the inward normal, both taken at the arrival knot. A
// sub-interval product whose start knot was flagged picks up a leading
// projector, so it annihilates normal components there; projectors are
// idempotent, which keeps the chain rule Q_{0,j} = Q_{0,k} Q_{k,j} exact.

// P_k = nu nu^T from the boundary normal at knot k (zero matrix when the
// normal is unavailable).
Mat normal_projector(const Manifold& m, const PathSample& path, int k);

// F_k for the transition k -> k+1.
Mat damping_factor(const Manifold& m, const PathSample& path, int k, double dt);

// Q_{0,k} for every knot. out[0] = I.
void forward_damping(const Manifold& m, const PathSample& path, double dt,
                     std::vector<Mat>& out);

// Q_{0,n} without storing the table.
Mat endpoint_damping(const Manifold& m, const PathSample& path, double dt);

// Q_{k,j} for all k <= j at fixed j, including the leading projector at
// flagged start knots. out[k] is valid for k <= j.
void backward_damping(const Manifold& m, const PathSample& path, double dt, int j,
                      std::vector<Mat>& out);

// Verify the pathwise operator-norm bound
//   ||Q_{0,k}|| <= exp(-ric_low t_k - bend_low l_k)
// for claimed lower bounds on the curvature tensor and the bending form, with
// an additive slack tol*(1 + bound) absorbing quadrature roundoff, and the
// annihilation invariant ||Q_{0,k} P_k|| at every flagged knot.
struct DampingBoundReport {
  double max_excess = -kInf;   // max over knots of (opnorm - bound) / (1 + bound)
  double max_projected = 0.0;  // max over flagged knots of ||Q_{0,k} P_k||
  bool bound_ok = true;
  bool projection_ok = true;
};

DampingBoundReport damping_bound_check(const Manifold& m, const PathSample& path, double dt,
                                       double ric_low, double bend_low, double tol = 1e-3,
                                       double proj_tol = 1e-6);

}  // namespace ricprobe

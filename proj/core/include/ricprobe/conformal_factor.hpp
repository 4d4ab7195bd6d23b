#pragma once

#include <functional>
#include <string>

#include "ricprobe/types.hpp"

namespace ricprobe {

// Positive scalar field stored through its logarithm, with optional analytic
// first and second derivative data. Serves as the metric factor of the disk
// chart and as the deformation factor of the metric-change module; the input
// vector lives in whatever coordinates the consumer works in (chart or
// ambient), and the Laplacian is the flat one in those coordinates.
struct ConformalFactor {
  std::function<double(const Vec&)> log_value;       // empty = identically 1
  std::function<Vec(const Vec&)> grad_log;           // optional
  std::function<double(const Vec&)> laplacian_log;   // optional
  std::string label = "flat";

  bool is_flat() const { return !log_value; }

  double log_at(const Vec& u) const { return log_value ? log_value(u) : 0.0; }
  double value(const Vec& u) const { return std::exp(log_at(u)); }

  // Analytic derivative if supplied, otherwise central finite differences on
  // log_value with step kFdHessianStep.
  Vec grad_log_at(const Vec& u) const;
  double laplacian_log_at(const Vec& u) const;

  static ConformalFactor flat();
  // log lambda = a * W(|u - center|) with W the C^3 window that is exactly 1
  // inside r_in and exactly 0 outside r_out. All derivatives analytic.
  static ConformalFactor bump(double a, const Vec& center, double r_in, double r_out);
  // lambda(u) = 1 / (1 + |u|^2 / 4): tangent-plane stereographic factor of the
  // unit sphere, Gauss curvature +1, lambda(0) = 1, grad lambda(0) = 0.
  static ConformalFactor stereographic();
  // Pointwise product (logs add). Derivative data survives only if both
  // factors carry it.
  static ConformalFactor product(ConformalFactor f, ConformalFactor g);
};

}  // namespace ricprobe

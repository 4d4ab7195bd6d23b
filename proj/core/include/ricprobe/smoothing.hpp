#pragma once

#include <cmath>

namespace ricprobe {

// Seventh-degree smoothstep: s(0)=0, s(1)=1, with three vanishing derivatives
// at both ends, so compositions stay C^3.
inline double c3_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * u * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)));
}

inline double c3_step_deriv(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double m = 1.0 - u;
  return 140.0 * u * u * u * m * m * m;
}

inline double c3_step_second(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double m = 1.0 - u;
  return 420.0 * u * u * m * m * (1.0 - 2.0 * u);
}

// Radial cutoff window: 1 on [0, r_in], 0 on [r_out, inf), C^3 ramp between.
inline double radial_window(double r, double r_in, double r_out) {
  if (r <= r_in) return 1.0;
  if (r >= r_out) return 0.0;
  return 1.0 - c3_step((r - r_in) / (r_out - r_in));
}

inline double radial_window_deriv(double r, double r_in, double r_out) {
  if (r <= r_in || r >= r_out) return 0.0;
  const double w = r_out - r_in;
  return -c3_step_deriv((r - r_in) / w) / w;
}

inline double radial_window_second(double r, double r_in, double r_out) {
  if (r <= r_in || r >= r_out) return 0.0;
  const double w = r_out - r_in;
  return -c3_step_second((r - r_in) / w) / (w * w);
}

}  // namespace ricprobe

#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace ricprobe {

// Largest ambient dimension across the manifold catalog (S^5 in R^6). Vectors
// and frame matrices are fixed-capacity so per-step work never allocates.
inline constexpr int kMaxAmbientDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::AutoAlign, kMaxAmbientDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::AutoAlign,
                          kMaxAmbientDim, kMaxAmbientDim>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

// Constraint residual allowed after projection, per step.
inline constexpr double kTolOnManifold = 1e-10;
// Frame Gram deviation from identity allowed after transport + re-orthonormalization.
inline constexpr double kTolFrameGram = 1e-8;
// Step for geodesic central differences (drift derivatives, Hessian checks).
inline constexpr double kFdHessianStep = 1e-4;

}  // namespace ricprobe

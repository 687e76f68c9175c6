#pragma once

#include <Eigen/Dense>
#include <ceres/jet.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace airpose {

// Model dimensions. The body has 22 joints (pelvis root + 21 articulated),
// 5 proxy vertices rigidly attached per segment, a 10-dimensional shape
// space and a 32-dimensional latent pose space. Rotations use the 6D
// (first-two-columns) representation, so the articulated pose has 21*6 = 126
// coordinates.
inline constexpr int kNumJoints = 22;
inline constexpr int kNumPoseJoints = kNumJoints - 1;
inline constexpr int kVerticesPerJoint = 5;
inline constexpr int kNumVertices = kNumJoints * kVerticesPerJoint;
inline constexpr int kShapeDim = 10;
inline constexpr int kThetaDim = 6 * kNumPoseJoints;
inline constexpr int kLatentDim = 32;
inline constexpr int kRootJoint = 0;

template <typename T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Vec6 = Eigen::Matrix<T, 6, 1>;
template <typename T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using ThetaVecT = Eigen::Matrix<T, kThetaDim, 1>;
template <typename T> using ShapeVecT = Eigen::Matrix<T, kShapeDim, 1>;
template <typename T> using LatentVecT = Eigen::Matrix<T, kLatentDim, 1>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Vec6d = Vec6<double>;
using Mat3d = Mat3<double>;
using ThetaVec = ThetaVecT<double>;
using ShapeVec = ShapeVecT<double>;
using LatentVec = LatentVecT<double>;

// Extracts the value part of a (possibly dual) scalar so that branch
// conditions and diagnostics never depend on derivative payloads.
inline double scalar_value(double x) { return x; }
template <typename T, int N>
double scalar_value(const ceres::Jet<T, N>& x) {
  return x.a;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Validation-class errors (CLI exit code 2).
struct ShapeMismatch : Error { using Error::Error; };
struct EmptyBox : Error { using Error::Error; };
struct SequenceTooShort : Error { using Error::Error; };
struct EmptySequence : Error { using Error::Error; };
struct MalformedMessage : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DatasetError : Error { using Error::Error; };
struct ExchangeTimeout : Error { using Error::Error; };

// Numerical-class errors (CLI exit code 3).
struct DegenerateRotation : Error { using Error::Error; };
struct NotARotation : Error { using Error::Error; };
struct BehindCamera : Error { using Error::Error; };
struct NonFiniteObjective : Error { using Error::Error; };

}  // namespace airpose

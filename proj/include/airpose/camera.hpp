#pragma once

#include "airpose/types.hpp"

namespace airpose {

// Network-input crop side in pixels; the resize scale s of a crop is defined
// relative to it.
inline constexpr double kCropInputSize = 224.0;

// Root-translation normalization constant (assumed maximum person depth in
// meters). Estimator state stores tau divided by this value.
inline constexpr double kTauNormalization = 20.0;

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
};

// Compact full-image descriptor of a crop: P = [bx, by, s]. bx/by are the
// crop-center offset from the principal point normalized by the principal
// point; s is the resize scale relative to the 224 px network input.
struct CropParams {
  double bx = 0, by = 0;
  double s = 1;
};

// World -> camera extrinsic: X_cam = rotation * X_world + translation.
// Ground-truth only; estimation never consumes it.
struct CameraPose {
  Mat3d rotation = Mat3d::Identity();
  Vec3d translation = Vec3d::Zero();
};

template <typename T>
Vec2<T> project(const Vec3<T>& p, const Intrinsics& K) {
  if (scalar_value(p.z()) <= 1e-6)
    throw BehindCamera("project: point at or behind the camera plane");
  Vec2<T> uv;
  uv.x() = T(K.fx) * (p.x() / p.z()) + T(K.cx);
  uv.y() = T(K.fy) * (p.y() / p.z()) + T(K.cy);
  return uv;
}

struct BBox {
  double x0 = 0, y0 = 0;
  double width = 0, height = 0;
};

// Expands the short side about the box center so the crop keeps the aspect
// ratio of the fixed-size network input.
inline BBox squarify_bbox(const BBox& b) {
  const double side = std::max(b.width, b.height);
  return {b.x0 - 0.5 * (side - b.width), b.y0 - 0.5 * (side - b.height), side, side};
}

inline CropParams crop_params_from_bbox(double x0, double y0, double side,
                                        const Intrinsics& K) {
  if (side <= 0) throw EmptyBox("crop_params_from_bbox: side must be positive");
  CropParams P;
  P.s = side / kCropInputSize;
  P.bx = (x0 + 0.5 * side - K.cx) / K.cx;
  P.by = (y0 + 0.5 * side - K.cy) / K.cy;
  return P;
}

// Crop-frame -> full-camera-frame root translation: z = z_c * s, then the
// lateral components pick up the pixel offset b*c back-projected at depth z.
template <typename T>
Vec3<T> crop_to_full(const Vec3<T>& tau_c, const CropParams& P, const Intrinsics& K) {
  if (scalar_value(tau_c.z()) <= 0)
    throw BehindCamera("crop_to_full: nonpositive depth");
  Vec3<T> tau;
  tau.z() = tau_c.z() * T(P.s);
  tau.x() = tau_c.x() + tau.z() * T(P.bx * K.cx / K.fx);
  tau.y() = tau_c.y() + tau.z() * T(P.by * K.cy / K.fy);
  return tau;
}

template <typename T>
Vec3<T> full_to_crop(const Vec3<T>& tau, const CropParams& P, const Intrinsics& K) {
  if (scalar_value(tau.z()) <= 0)
    throw BehindCamera("full_to_crop: nonpositive depth");
  Vec3<T> tau_c;
  tau_c.z() = tau.z() / T(P.s);
  tau_c.x() = tau.x() - tau.z() * T(P.bx * K.cx / K.fx);
  tau_c.y() = tau.y() - tau.z() * T(P.by * K.cy / K.fy);
  return tau_c;
}

template <typename T>
Vec3<T> tau_normalize(const Vec3<T>& tau) {
  return tau / T(kTauNormalization);
}

template <typename T>
Vec3<T> tau_denormalize(const Vec3<T>& tau) {
  return tau * T(kTauNormalization);
}

}  // namespace airpose

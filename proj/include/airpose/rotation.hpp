#pragma once

#include <cmath>

#include "airpose/types.hpp"

namespace airpose {

// 6D rotation representation: the first two columns of a rotation matrix,
// stored column-major as [c0; c1]. Decoding Gram-Schmidts the pair, so any
// per-column scaling of a valid encoding decodes to the same rotation.

inline Vec6d identity_rot6d() {
  Vec6d r;
  r << 1, 0, 0, 0, 1, 0;
  return r;
}

inline ThetaVec identity_theta() {
  ThetaVec theta;
  for (int j = 0; j < kNumPoseJoints; ++j) theta.segment<6>(6 * j) = identity_rot6d();
  return theta;
}

// Gram-Schmidt decode: normalize c0, orthogonalize-normalize c1, complete
// with the cross product. The all-zero vector decodes to identity so that
// zero-filled pose comparisons stay total; any other (near-)degenerate pair
// throws DegenerateRotation.
template <typename T>
Mat3<T> rot6d_decode(const Vec6<T>& r) {
  bool all_zero = true;
  for (int i = 0; i < 6; ++i) all_zero = all_zero && scalar_value(r[i]) == 0.0;
  if (all_zero) return Mat3<T>::Identity();

  const Vec3<T> a = r.template head<3>();
  const Vec3<T> b = r.template tail<3>();
  const T na = a.norm();
  const T nb = b.norm();
  if (scalar_value(na) < 1e-12 || scalar_value(nb) < 1e-12)
    throw DegenerateRotation("rot6d_decode: column norm below 1e-12");

  const Vec3<T> c0 = a / na;
  const Vec3<T> u = b - c0.dot(b) * c0;
  const T nu = u.norm();
  if (scalar_value(nu) < 1e-12 * scalar_value(nb))
    throw DegenerateRotation("rot6d_decode: columns parallel within 1e-12");
  const Vec3<T> c1 = u / nu;

  Mat3<T> R;
  R.col(0) = c0;
  R.col(1) = c1;
  R.col(2) = c0.cross(c1);
  return R;
}

inline Vec6d rot6d_encode(const Mat3d& R) {
  const double ortho = (R.transpose() * R - Mat3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6)
    throw NotARotation("rot6d_encode: input not orthonormal with det +1 within 1e-6");
  Vec6d r;
  r.head<3>() = R.col(0);
  r.tail<3>() = R.col(1);
  return r;
}

}  // namespace airpose

#pragma once

#include <array>
#include <cstdint>

#include "airpose/rng.hpp"
#include "airpose/rotation.hpp"
#include "airpose/types.hpp"

namespace airpose {

// Per-view body state: root translation tau (meters), root rotation phi (6D),
// articulated pose theta (21 x 6D) and shape beta.
template <typename T>
struct BodyParamsT {
  Vec3<T> tau = Vec3<T>::Zero();
  Vec6<T> phi;
  ThetaVecT<T> theta;
  ShapeVecT<T> beta = ShapeVecT<T>::Zero();

  BodyParamsT() {
    phi << T(1), T(0), T(0), T(0), T(1), T(0);
    for (int j = 0; j < kNumPoseJoints; ++j) {
      theta.template segment<6>(6 * j) << T(1), T(0), T(0), T(0), T(1), T(0);
    }
  }

  bool all_finite() const {
    auto fin = [](const auto& v) {
      for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(scalar_value(v[i]))) return false;
      return true;
    };
    return fin(tau) && fin(phi) && fin(theta) && fin(beta);
  }
};

using BodyParams = BodyParamsT<double>;

enum BodyJoint : int {
  Pelvis = 0,
  Spine1, Spine2, Spine3, Neck, Head,
  LeftClavicle, LeftShoulder, LeftElbow, LeftWrist,
  RightClavicle, RightShoulder, RightElbow, RightWrist,
  LeftHip, LeftKnee, LeftAnkle, LeftFoot,
  RightHip, RightKnee, RightAnkle, RightFoot,
};

// Fixed, versioned stand-in geometry: 22-joint kinematic tree with linear
// shape blendshapes for joints and 5 proxy vertices rigidly attached per
// segment. Body frame: Z up, person facing +X, left side +Y.
struct BodyTemplate {
  int version = 1;
  std::uint64_t seed = 0;
  std::array<int, kNumJoints> parent{};
  Eigen::Matrix<double, 3, kNumJoints> rest_joints;
  std::array<Eigen::Matrix<double, 3, kShapeDim>, kNumJoints> joint_shape_basis;
  Eigen::Matrix<double, 3, kNumVertices> rest_vertices;
  std::array<int, kNumVertices> vertex_joint{};
  std::array<Eigen::Matrix<double, 3, kShapeDim>, kNumVertices> vertex_shape_basis;
};

namespace detail {

// Shape modes are region-gated affine fields d(x) = gain[joint] * (M x + o),
// evaluated at the rest position of each joint/vertex. Modes 0-4 are fixed
// anthropometric-style modes (height, size, arm span, leg length, torso
// width); modes 5-9 are small seeded affine fields.
struct ShapeMode {
  Mat3d M = Mat3d::Zero();
  Vec3d o = Vec3d::Zero();
  std::array<double, kNumJoints> gain{};
};

inline std::array<ShapeMode, kShapeDim> make_shape_modes(std::uint64_t seed) {
  std::array<ShapeMode, kShapeDim> modes;
  auto gain_all = [](ShapeMode& m, double g) { m.gain.fill(g); };
  auto gain_set = [](ShapeMode& m, std::initializer_list<int> js, double g) {
    for (int j : js) m.gain[static_cast<size_t>(j)] = g;
  };

  modes[0].M = Vec3d(0, 0, 0.05).asDiagonal();  // height
  gain_all(modes[0], 1.0);
  modes[1].M = 0.04 * Mat3d::Identity();  // overall size
  gain_all(modes[1], 1.0);
  modes[2].M = Vec3d(0, 0.06, 0).asDiagonal();  // arm span
  gain_set(modes[2], {LeftShoulder, LeftElbow, LeftWrist, RightShoulder, RightElbow, RightWrist}, 1.0);
  modes[3].M = Vec3d(0, 0, 0.07).asDiagonal();  // leg length
  gain_set(modes[3], {LeftKnee, LeftAnkle, LeftFoot, RightKnee, RightAnkle, RightFoot}, 1.0);
  modes[4].M = Vec3d(0, 0.05, 0).asDiagonal();  // torso width
  gain_set(modes[4], {LeftClavicle, LeftShoulder, RightClavicle, RightShoulder, LeftHip, RightHip}, 1.0);

  Rng rng(Rng::derive_seed(seed, 0x5a));
  for (int k = 5; k < kShapeDim; ++k) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) modes[k].M(r, c) = rng.normal(0.0, 0.01);
    for (int r = 0; r < 3; ++r) modes[k].o[r] = rng.normal(0.0, 0.01);
    gain_all(modes[k], 1.0);
  }
  return modes;
}

}  // namespace detail

inline BodyTemplate make_default_template(std::uint64_t seed = 2024) {
  BodyTemplate t;
  t.seed = seed;
  t.parent = {-1, Pelvis, Spine1, Spine2, Spine3, Neck,
              Spine3, LeftClavicle, LeftShoulder, LeftElbow,
              Spine3, RightClavicle, RightShoulder, RightElbow,
              Pelvis, LeftHip, LeftKnee, LeftAnkle,
              Pelvis, RightHip, RightKnee, RightAnkle};

  auto set = [&](int j, double x, double y, double z) { t.rest_joints.col(j) << x, y, z; };
  set(Pelvis, 0.00, 0.00, 0.00);
  set(Spine1, 0.00, 0.00, 0.12);
  set(Spine2, 0.00, 0.00, 0.26);
  set(Spine3, 0.00, 0.00, 0.40);
  set(Neck, 0.00, 0.00, 0.55);
  set(Head, 0.00, 0.00, 0.67);
  set(LeftClavicle, 0.00, 0.07, 0.52);
  set(LeftShoulder, 0.00, 0.19, 0.52);
  set(LeftElbow, 0.00, 0.45, 0.52);
  set(LeftWrist, 0.00, 0.71, 0.52);
  set(RightClavicle, 0.00, -0.07, 0.52);
  set(RightShoulder, 0.00, -0.19, 0.52);
  set(RightElbow, 0.00, -0.45, 0.52);
  set(RightWrist, 0.00, -0.71, 0.52);
  set(LeftHip, 0.00, 0.10, -0.06);
  set(LeftKnee, 0.00, 0.10, -0.50);
  set(LeftAnkle, 0.00, 0.10, -0.93);
  set(LeftFoot, 0.12, 0.10, -1.00);
  set(RightHip, 0.00, -0.10, -0.06);
  set(RightKnee, 0.00, -0.10, -0.50);
  set(RightAnkle, 0.00, -0.10, -0.93);
  set(RightFoot, 0.12, -0.10, -1.00);

  const auto modes = detail::make_shape_modes(seed);
  for (int j = 0; j < kNumJoints; ++j)
    for (int k = 0; k < kShapeDim; ++k)
      t.joint_shape_basis[static_cast<size_t>(j)].col(k) =
          modes[static_cast<size_t>(k)].gain[static_cast<size_t>(j)] *
          (modes[static_cast<size_t>(k)].M * t.rest_joints.col(j) + modes[static_cast<size_t>(k)].o);

  Rng rng(Rng::derive_seed(seed, 0x7e));
  for (int j = 0; j < kNumJoints; ++j) {
    for (int k = 0; k < kVerticesPerJoint; ++k) {
      const int v = j * kVerticesPerJoint + k;
      t.vertex_joint[static_cast<size_t>(v)] = j;
      const Vec3d offset(rng.normal(0.0, 0.05), rng.normal(0.0, 0.05), rng.normal(0.0, 0.05));
      t.rest_vertices.col(v) = t.rest_joints.col(j) + offset;
      for (int m = 0; m < kShapeDim; ++m)
        t.vertex_shape_basis[static_cast<size_t>(v)].col(m) =
            modes[static_cast<size_t>(m)].gain[static_cast<size_t>(j)] *
            (modes[static_cast<size_t>(m)].M * t.rest_vertices.col(v) + modes[static_cast<size_t>(m)].o);
    }
  }
  return t;
}

// Shape-adjusted rest joints: linear in beta.
template <typename T>
Eigen::Matrix<T, 3, kNumJoints> shaped_joints(const ShapeVecT<T>& beta, const BodyTemplate& t) {
  Eigen::Matrix<T, 3, kNumJoints> out;
  for (int j = 0; j < kNumJoints; ++j) {
    Vec3<T> p = t.rest_joints.col(j).template cast<T>();
    for (int k = 0; k < kShapeDim; ++k)
      p += beta[k] * t.joint_shape_basis[static_cast<size_t>(j)].col(k);
    out.col(j) = p;
  }
  return out;
}

namespace detail {

// Forward kinematics in the body frame (before root rotation/translation).
// A[i] is the accumulated orientation of joint i; joint rotations act on the
// subtree below the joint, so positions use the parent's frame.
template <typename T>
struct FkResult {
  Eigen::Matrix<T, 3, kNumJoints> position;
  std::array<Mat3<T>, kNumJoints> orientation;
  Eigen::Matrix<T, 3, kNumJoints> shaped;
};

template <typename T>
FkResult<T> forward_kinematics(const ThetaVecT<T>& theta, const ShapeVecT<T>& beta,
                               const BodyTemplate& t) {
  FkResult<T> fk;
  fk.shaped = shaped_joints<T>(beta, t);
  fk.orientation[0] = Mat3<T>::Identity();
  fk.position.col(0) = fk.shaped.col(0);
  for (int j = 1; j < kNumJoints; ++j) {
    const int p = t.parent[static_cast<size_t>(j)];
    const Vec6<T> r = theta.template segment<6>(6 * (j - 1));
    fk.orientation[static_cast<size_t>(j)] =
        fk.orientation[static_cast<size_t>(p)] * rot6d_decode<T>(r);
    fk.position.col(j) = fk.position.col(p) +
                         fk.orientation[static_cast<size_t>(p)] *
                             (fk.shaped.col(j) - fk.shaped.col(p)).eval();
  }
  return fk;
}

}  // namespace detail

// World-frame joints: j_i = tau + R(phi) * FK_i(theta, shaped rest joints).
template <typename T>
Eigen::Matrix<T, 3, kNumJoints> joints(const BodyParamsT<T>& params, const BodyTemplate& t) {
  const auto fk = detail::forward_kinematics<T>(params.theta, params.beta, t);
  const Mat3<T> R = rot6d_decode<T>(params.phi);
  Eigen::Matrix<T, 3, kNumJoints> out;
  for (int j = 0; j < kNumJoints; ++j) out.col(j) = params.tau + R * fk.position.col(j).eval();
  return out;
}

// World-frame proxy vertices; each vertex follows its joint's world transform
// rigidly (offset measured in the shape-adjusted rest pose).
template <typename T>
Eigen::Matrix<T, 3, kNumVertices> vertices(const BodyParamsT<T>& params, const BodyTemplate& t) {
  const auto fk = detail::forward_kinematics<T>(params.theta, params.beta, t);
  const Mat3<T> R = rot6d_decode<T>(params.phi);
  Eigen::Matrix<T, 3, kNumVertices> out;
  for (int v = 0; v < kNumVertices; ++v) {
    const int j = t.vertex_joint[static_cast<size_t>(v)];
    Vec3<T> rest = t.rest_vertices.col(v).template cast<T>();
    for (int k = 0; k < kShapeDim; ++k)
      rest += params.beta[k] * t.vertex_shape_basis[static_cast<size_t>(v)].col(k);
    const Vec3<T> local =
        fk.position.col(j) + fk.orientation[static_cast<size_t>(j)] * (rest - fk.shaped.col(j).eval());
    out.col(v) = params.tau + R * local;
  }
  return out;
}

}  // namespace airpose

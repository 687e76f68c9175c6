#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "airpose/body_model.hpp"
#include "airpose/camera.hpp"
#include "airpose/model.hpp"
#include "airpose/pose_prior.hpp"

namespace airpose {

// One detected 2D keypoint: pixel position J and confidence w in [0,1].
// Missing detections carry w = 0.
struct Keypoint {
  Vec2d J = Vec2d::Zero();
  double w = 0.0;
};

struct KeypointObservation {
  std::array<Keypoint, kNumJoints> joints{};

  double total_confidence() const {
    double s = 0.0;
    for (const auto& k : joints) s += k.w;
    return s;
  }
};

struct LossWeights {
  double j2d = 0, j3d = 0, phi = 0, tau = 0, theta = 0, beta = 0, V = 0;
  double vposer = 0, temp = 0;
};

// Named weight presets. The eq* names address the published weight bundles.
inline LossWeights loss_weights_preset(std::string_view name) {
  if (name == "eq3-baseline-syn")
    return {.j2d = 0.01, .j3d = 1, .phi = 1, .theta = 100, .beta = 1, .V = 100};
  if (name == "eq4-airpose-syn")
    return {.j2d = 0.002, .j3d = 1, .phi = 1, .tau = 10, .theta = 50, .beta = 1, .V = 50};
  if (name == "eq5-finetune-baseline")
    return {.j2d = 0.01, .beta = 5, .vposer = 1};
  if (name == "eq6-finetune-airpose")
    return {.j2d = 0.01, .theta = 100, .beta = 5, .vposer = 0.1};
  if (name == "eq8-airpose-plus")
    return {.j2d = 1, .beta = 2000, .vposer = 0.05, .temp = 1};
  throw ConfigError("unknown loss weight preset: " + std::string(name));
}

// Geman-McClure robust penalty defaults; both are configurable.
inline constexpr double kDefaultGemanMcclureSigmaPx = 100.0;
inline constexpr double kDefaultConfidenceThreshold = 0.25 * 2 * kNumJoints;

struct GroundTruth {
  std::vector<Vec3d> tau_gt;  // per camera, full camera frame
  std::vector<Vec6d> phi_gt;  // per camera
  ThetaVec theta_gt = identity_theta();
  ShapeVec beta_gt = ShapeVec::Zero();

  int cameras() const { return static_cast<int>(tau_gt.size()); }
};

struct LossResult {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> terms;

  double term(std::string_view name) const {
    for (const auto& [k, v] : terms)
      if (k == name) return v;
    throw ShapeMismatch("unknown loss term: " + std::string(name));
  }
};

// Bounded robust penalty rho(e) = sigma^2 e^2 / (sigma^2 + e^2), applied
// elementwise to residual components.
template <typename T>
T geman_mcclure(const T& e, double sigma) {
  const T e2 = e * e;
  return T(sigma * sigma) * e2 / (T(sigma * sigma) + e2);
}

namespace detail {

inline void require_cameras(const GroundTruth& gt, int n, const char* where) {
  if (gt.cameras() != n || static_cast<int>(gt.phi_gt.size()) != n)
    throw ShapeMismatch(std::string(where) + ": ground truth must carry " + std::to_string(n) +
                        " camera(s)");
}

template <typename T>
BodyParamsT<T> pose_only(const ThetaVecT<T>& theta, const ShapeVecT<T>& beta) {
  BodyParamsT<T> p;
  p.tau.setZero();
  p.phi.setZero();  // all-zero 6D decodes to identity
  p.theta = theta;
  p.beta = beta;
  return p;
}

template <typename T>
BodyParamsT<T> rooted(const Vec6<T>& phi, const ThetaVecT<T>& theta, const ShapeVecT<T>& beta) {
  BodyParamsT<T> p;
  p.tau.setZero();
  p.phi = phi;
  p.theta = theta;
  p.beta = beta;
  return p;
}

template <typename T>
Eigen::Matrix<T, 3, kNumJoints> joints_full_frame(const BodyParamsT<T>& params,
                                                  const Intrinsics& K, const CropParams& P,
                                                  const BodyTemplate& t) {
  BodyParamsT<T> full = params;
  full.tau = crop_to_full<T>(params.tau, P, K);
  return joints<T>(full, t);
}

// || P(J(est)) - P(J(gt)) ||^2 over all joints, full-image pixels. The
// estimate's tau is interpreted in the crop frame described by P (pass the
// identity crop for full-frame parameters); ground truth is full-frame.
template <typename T>
T gt_reprojection_sq(const Model& m, const BodyParamsT<T>& params, const Vec3d& tau_gt,
                     const Vec6d& phi_gt, const ThetaVec& theta_gt, const ShapeVec& beta_gt,
                     const Intrinsics& K, const CropParams& P) {
  const Eigen::Matrix<T, 3, kNumJoints> est = joints_full_frame<T>(params, K, P, m.body);
  BodyParams gt_params;
  gt_params.tau = tau_gt;
  gt_params.phi = phi_gt;
  gt_params.theta = theta_gt;
  gt_params.beta = beta_gt;
  const Eigen::Matrix<double, 3, kNumJoints> ref = joints<double>(gt_params, m.body);
  T acc(0);
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2<T> uv = project<T>(est.col(j).eval(), K);
    const Vec2d uv_gt = project<double>(ref.col(j).eval(), K);
    const T du = uv.x() - T(uv_gt.x());
    const T dv = uv.y() - T(uv_gt.y());
    acc += du * du + dv * dv;
  }
  return acc;
}

// sum_j w_j ((u - J_u)^2 + (v - J_v)^2) against detected keypoints.
template <typename T>
T weighted_reprojection_sq(const Model& m, const BodyParamsT<T>& params,
                           const KeypointObservation& obs, const Intrinsics& K,
                           const CropParams& P) {
  const Eigen::Matrix<T, 3, kNumJoints> est = joints_full_frame<T>(params, K, P, m.body);
  T acc(0);
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2<T> uv = project<T>(est.col(j).eval(), K);
    const T du = uv.x() - T(obs.joints[static_cast<size_t>(j)].J.x());
    const T dv = uv.y() - T(obs.joints[static_cast<size_t>(j)].J.y());
    acc += obs.joints[static_cast<size_t>(j)].w * (du * du + dv * dv);
  }
  return acc;
}

// Robust variant: sum_j w_j (rho(u - J_u) + rho(v - J_v)).
template <typename T>
T robust_reprojection(const Model& m, const BodyParamsT<T>& params, const KeypointObservation& obs,
                      const Intrinsics& K, const CropParams& P, double sigma) {
  const Eigen::Matrix<T, 3, kNumJoints> est = joints_full_frame<T>(params, K, P, m.body);
  T acc(0);
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2<T> uv = project<T>(est.col(j).eval(), K);
    const T du = uv.x() - T(obs.joints[static_cast<size_t>(j)].J.x());
    const T dv = uv.y() - T(obs.joints[static_cast<size_t>(j)].J.y());
    acc += obs.joints[static_cast<size_t>(j)].w * (geman_mcclure<T>(du, sigma) + geman_mcclure<T>(dv, sigma));
  }
  return acc;
}

template <typename T>
T sq_norm(const Eigen::Matrix<T, Eigen::Dynamic, 1>& v) {
  return v.squaredNorm();
}

struct TermSink {
  std::vector<std::pair<std::string, double>>* out = nullptr;
  template <typename T>
  void operator()(const char* name, const T& value) const {
    if (out) out->emplace_back(name, scalar_value(value));
  }
};

}  // namespace detail

// Single-camera synthetic-supervision loss: weighted sum of 2D reprojection,
// pose-only 3D joint/vertex errors (zero-filled root), parameter errors and
// the shape regularizer.
template <typename T>
T loss_baseline_value(const Model& m, const BodyParamsT<T>& params, const GroundTruth& gt,
                      const Intrinsics& K, const CropParams& P, const LossWeights& w,
                      detail::TermSink sink = {}) {
  detail::require_cameras(gt, 1, "loss_baseline");
  const auto est_pose = detail::pose_only<T>(params.theta, params.beta);
  BodyParams gt_pose_params;
  gt_pose_params.tau.setZero();
  gt_pose_params.phi.setZero();
  gt_pose_params.theta = gt.theta_gt;
  gt_pose_params.beta = gt.beta_gt;

  const T j2d = w.j2d * detail::gt_reprojection_sq<T>(m, params, gt.tau_gt[0], gt.phi_gt[0],
                                                      gt.theta_gt, gt.beta_gt, K, P);
  const Eigen::Matrix<T, 3, kNumJoints> j_est = joints<T>(est_pose, m.body);
  const Eigen::Matrix<double, 3, kNumJoints> j_gt = joints<double>(gt_pose_params, m.body);
  T j3d(0);
  for (int j = 0; j < kNumJoints; ++j)
    for (int r = 0; r < 3; ++r) {
      const T d = j_est(r, j) - T(j_gt(r, j));
      j3d += d * d;
    }
  j3d = w.j3d * j3d;

  T phi(0);
  for (int i = 0; i < 6; ++i) {
    const T d = params.phi[i] - T(gt.phi_gt[0][i]);
    phi += d * d;
  }
  phi = w.phi * phi;

  T theta(0);
  for (int i = 0; i < kThetaDim; ++i) {
    const T d = params.theta[i] - T(gt.theta_gt[i]);
    theta += d * d;
  }
  theta = w.theta * theta;

  const T beta = w.beta * params.beta.squaredNorm();

  const Eigen::Matrix<T, 3, kNumVertices> v_est = vertices<T>(est_pose, m.body);
  const Eigen::Matrix<double, 3, kNumVertices> v_gt = vertices<double>(gt_pose_params, m.body);
  T V(0);
  for (int v = 0; v < kNumVertices; ++v)
    for (int r = 0; r < 3; ++r) {
      const T d = v_est(r, v) - T(v_gt(r, v));
      V += d * d;
    }
  V = w.V * V;

  sink("j2d", j2d);
  sink("j3d", j3d);
  sink("phi", phi);
  sink("theta", theta);
  sink("beta", beta);
  sink("V", V);
  return j2d + j3d + phi + theta + beta + V;
}

// Two-camera training loss: per-camera terms plus cross-view consistency on
// theta, beta and vertices. Cross terms are symmetric in value; the
// distributed estimator differentiates them with the partner held constant.
template <typename T>
T loss_airpose_value(const Model& m, const std::array<BodyParamsT<T>, 2>& params,
                     const GroundTruth& gt, const std::array<Intrinsics, 2>& K,
                     const std::array<CropParams, 2>& P, const LossWeights& w,
                     detail::TermSink sink = {}) {
  detail::require_cameras(gt, 2, "loss_airpose");
  T j2d(0), j3d(0), phi(0), tau(0), theta(0), beta(0), V(0);

  // Pose-only (zero-filled root) estimates feed both the j3d term and the
  // cross-view vertex term; the per-camera vertex term roots each mesh with
  // its own phi. The cross-view vertex comparison is rotation invariant, so
  // evaluating it pose-only equals the both-directions-halved evaluation
  // under either camera's root rotation.
  std::array<Eigen::Matrix<T, 3, kNumVertices>, 2> v0_est;
  BodyParams gt_pose_params;
  gt_pose_params.tau.setZero();
  gt_pose_params.phi.setZero();
  gt_pose_params.theta = gt.theta_gt;
  gt_pose_params.beta = gt.beta_gt;
  const Eigen::Matrix<double, 3, kNumJoints> j_gt = joints<double>(gt_pose_params, m.body);
  const Eigen::Matrix<double, 3, kNumVertices> v0_gt = vertices<double>(gt_pose_params, m.body);

  for (int c = 0; c < 2; ++c) {
    const auto& pc = params[static_cast<size_t>(c)];
    j2d += detail::gt_reprojection_sq<T>(m, pc, gt.tau_gt[static_cast<size_t>(c)],
                                         gt.phi_gt[static_cast<size_t>(c)], gt.theta_gt,
                                         gt.beta_gt, K[static_cast<size_t>(c)], P[static_cast<size_t>(c)]);

    const auto est_pose = detail::pose_only<T>(pc.theta, pc.beta);
    const Eigen::Matrix<T, 3, kNumJoints> j_est = joints<T>(est_pose, m.body);
    for (int j = 0; j < kNumJoints; ++j)
      for (int r = 0; r < 3; ++r) {
        const T d = j_est(r, j) - T(j_gt(r, j));
        j3d += d * d;
      }

    const Vec3<T> tau_full = crop_to_full<T>(pc.tau, P[static_cast<size_t>(c)], K[static_cast<size_t>(c)]);
    for (int i = 0; i < 3; ++i) {
      const T d = tau_full[i] - T(gt.tau_gt[static_cast<size_t>(c)][i]);
      tau += d * d;
    }
    for (int i = 0; i < 6; ++i) {
      const T d = pc.phi[i] - T(gt.phi_gt[static_cast<size_t>(c)][i]);
      phi += d * d;
    }
    for (int i = 0; i < kThetaDim; ++i) {
      const T d = pc.theta[i] - T(gt.theta_gt[i]);
      theta += d * d;
    }
    beta += pc.beta.squaredNorm();

    // Per-camera vertex term: mesh rooted with the camera's own phi against
    // the ground truth rooted with phi_gt. Rooted vertices are the rotated
    // pose-only vertices (tau is zero-filled here).
    v0_est[static_cast<size_t>(c)] = vertices<T>(est_pose, m.body);
    const Mat3<T> R_est = rot6d_decode<T>(pc.phi);
    const Mat3d R_gt = rot6d_decode<double>(gt.phi_gt[static_cast<size_t>(c)]);
    for (int v = 0; v < kNumVertices; ++v) {
      const Vec3<T> rooted = R_est * v0_est[static_cast<size_t>(c)].col(v).eval();
      const Vec3d ref = R_gt * v0_gt.col(v);
      for (int r = 0; r < 3; ++r) {
        const T d = rooted[r] - T(ref[r]);
        V += d * d;
      }
    }
  }

  T theta_x(0);
  for (int i = 0; i < kThetaDim; ++i) {
    const T d = params[0].theta[i] - params[1].theta[i];
    theta_x += d * d;
  }
  T beta_x(0);
  for (int i = 0; i < kShapeDim; ++i) {
    const T d = params[0].beta[i] - params[1].beta[i];
    beta_x += d * d;
  }
  T V_x(0);
  for (int v = 0; v < kNumVertices; ++v)
    for (int r = 0; r < 3; ++r) {
      const T d = v0_est[0](r, v) - v0_est[1](r, v);
      V_x += d * d;
    }

  j2d = w.j2d * j2d;
  j3d = w.j3d * j3d;
  phi = w.phi * phi;
  tau = w.tau * tau;
  theta = w.theta * theta;
  theta_x = w.theta * theta_x;
  beta = w.beta * beta;
  beta_x = w.beta * beta_x;
  V = w.V * V;
  V_x = w.V * V_x;

  sink("j2d", j2d);
  sink("j3d", j3d);
  sink("phi", phi);
  sink("tau", tau);
  sink("theta", theta);
  sink("theta_xview", theta_x);
  sink("beta", beta);
  sink("beta_xview", beta_x);
  sink("V", V);
  sink("V_xview", V_x);
  return j2d + j3d + phi + tau + theta + theta_x + beta + beta_x + V + V_x;
}

// Keypoint-supervised fine-tuning loss, single camera.
template <typename T>
T loss_finetune_baseline_value(const Model& m, const BodyParamsT<T>& params,
                               const KeypointObservation& obs, const Intrinsics& K,
                               const CropParams& P, const LossWeights& w,
                               detail::TermSink sink = {}) {
  const T j2d = w.j2d * detail::weighted_reprojection_sq<T>(m, params, obs, K, P);
  const T beta = w.beta * params.beta.squaredNorm();
  const T vposer = w.vposer * prior_encode<T>(params.theta, m.prior).squaredNorm();
  sink("j2d", j2d);
  sink("beta", beta);
  sink("vposer", vposer);
  return j2d + beta + vposer;
}

// Keypoint-supervised fine-tuning loss, two cameras with shared-shape and
// cross-view pose coupling.
template <typename T>
T loss_finetune_airpose_value(const Model& m, const std::array<BodyParamsT<T>, 2>& params,
                              const std::array<KeypointObservation, 2>& obs,
                              const std::array<Intrinsics, 2>& K,
                              const std::array<CropParams, 2>& P, const LossWeights& w,
                              detail::TermSink sink = {}) {
  T j2d(0), beta(0), vposer(0);
  for (int c = 0; c < 2; ++c) {
    j2d += detail::weighted_reprojection_sq<T>(m, params[static_cast<size_t>(c)],
                                               obs[static_cast<size_t>(c)], K[static_cast<size_t>(c)],
                                               P[static_cast<size_t>(c)]);
    beta += params[static_cast<size_t>(c)].beta.squaredNorm();
    vposer += prior_encode<T>(params[static_cast<size_t>(c)].theta, m.prior).squaredNorm();
  }
  T beta_x(0);
  for (int i = 0; i < kShapeDim; ++i) {
    const T d = params[0].beta[i] - params[1].beta[i];
    beta_x += d * d;
  }
  T theta(0);
  for (int i = 0; i < kThetaDim; ++i) {
    const T d = params[0].theta[i] - params[1].theta[i];
    theta += d * d;
  }
  j2d = w.j2d * j2d;
  beta = w.beta * beta;
  beta_x = w.beta * beta_x;
  vposer = w.vposer * vposer;
  theta = w.theta * theta;
  sink("j2d", j2d);
  sink("beta", beta);
  sink("beta_xview", beta_x);
  sink("vposer", vposer);
  sink("theta", theta);
  return j2d + beta + beta_x + vposer + theta;
}

inline LossResult loss_baseline(const Model& m, const BodyParams& params, const GroundTruth& gt,
                                const Intrinsics& K, const CropParams& P, const LossWeights& w) {
  LossResult r;
  r.total = loss_baseline_value<double>(m, params, gt, K, P, w, {&r.terms});
  return r;
}

inline LossResult loss_airpose(const Model& m, const std::array<BodyParams, 2>& params,
                               const GroundTruth& gt, const std::array<Intrinsics, 2>& K,
                               const std::array<CropParams, 2>& P, const LossWeights& w) {
  LossResult r;
  r.total = loss_airpose_value<double>(m, params, gt, K, P, w, {&r.terms});
  return r;
}

inline LossResult loss_finetune_baseline(const Model& m, const BodyParams& params,
                                         const KeypointObservation& obs, const Intrinsics& K,
                                         const CropParams& P, const LossWeights& w) {
  LossResult r;
  r.total = loss_finetune_baseline_value<double>(m, params, obs, K, P, w, {&r.terms});
  return r;
}

inline LossResult loss_finetune_airpose(const Model& m, const std::array<BodyParams, 2>& params,
                                        const std::array<KeypointObservation, 2>& obs,
                                        const std::array<Intrinsics, 2>& K,
                                        const std::array<CropParams, 2>& P, const LossWeights& w) {
  LossResult r;
  r.total = loss_finetune_airpose_value<double>(m, params, obs, K, P, w, {&r.terms});
  return r;
}

// ---------------------------------------------------------------------------
// Whole-sequence objective (offline refinement).

// Decision variables of the offline refinement: one shared shape, one shared
// latent pose per frame, per-camera root rotation/translation per frame.
struct SequenceEstimate {
  ShapeVec beta = ShapeVec::Zero();
  std::vector<LatentVec> v;
  std::vector<std::array<Vec6d, 2>> phi;
  std::vector<std::array<Vec3d, 2>> tau;

  int frames() const { return static_cast<int>(v.size()); }
};

struct CameraFrame {
  Intrinsics K;
  CropParams P;
};

struct SequenceObservations {
  std::vector<std::array<KeypointObservation, 2>> keypoints;  // [frame][camera]
  std::vector<std::array<CameraFrame, 2>> cameras;            // [frame][camera]

  int frames() const { return static_cast<int>(keypoints.size()); }
};

namespace detail {

inline bool frame_gated(const std::array<KeypointObservation, 2>& obs, double conf_threshold) {
  return obs[0].total_confidence() + obs[1].total_confidence() < conf_threshold;
}

}  // namespace detail

// Robust temporal batch loss over a SequenceEstimate:
//   sum_t (w_j2d L_j2d + w_vposer ||v_t||^2 + w_temp L_temp) + w_beta ||beta||^2
// Frames whose summed keypoint confidence falls below conf_threshold
// contribute no reprojection term. Summation order is fixed: t, then camera,
// then joint.
inline LossResult loss_airpose_plus(const Model& m, const SequenceEstimate& seq,
                                    const SequenceObservations& obs, const LossWeights& w,
                                    double sigma = kDefaultGemanMcclureSigmaPx,
                                    double conf_threshold = kDefaultConfidenceThreshold) {
  const int T_frames = seq.frames();
  if (T_frames < 2) throw SequenceTooShort("loss_airpose_plus: sequence length must be >= 2");
  if (obs.frames() != T_frames ||
      static_cast<int>(seq.phi.size()) != T_frames ||
      static_cast<int>(seq.tau.size()) != T_frames ||
      static_cast<int>(obs.cameras.size()) != static_cast<size_t>(T_frames))
    throw ShapeMismatch("loss_airpose_plus: sequence/observation length mismatch");

  double j2d = 0, vposer = 0, temp = 0;
  std::vector<ThetaVec> theta(static_cast<size_t>(T_frames));
  for (int t = 0; t < T_frames; ++t)
    theta[static_cast<size_t>(t)] = prior_decode<double>(seq.v[static_cast<size_t>(t)], m.prior);

  for (int t = 0; t < T_frames; ++t) {
    if (!detail::frame_gated(obs.keypoints[static_cast<size_t>(t)], conf_threshold)) {
      for (int c = 0; c < 2; ++c) {
        BodyParams p;
        p.tau = seq.tau[static_cast<size_t>(t)][static_cast<size_t>(c)];
        p.phi = seq.phi[static_cast<size_t>(t)][static_cast<size_t>(c)];
        p.theta = theta[static_cast<size_t>(t)];
        p.beta = seq.beta;
        j2d += detail::robust_reprojection<double>(
            m, p, obs.keypoints[static_cast<size_t>(t)][static_cast<size_t>(c)],
            obs.cameras[static_cast<size_t>(t)][static_cast<size_t>(c)].K,
            obs.cameras[static_cast<size_t>(t)][static_cast<size_t>(c)].P, sigma);
      }
    }
    vposer += seq.v[static_cast<size_t>(t)].squaredNorm();
    if (t >= 1) {
      temp += (theta[static_cast<size_t>(t)] - theta[static_cast<size_t>(t - 1)]).squaredNorm();
      for (int c = 0; c < 2; ++c) {
        temp += (seq.phi[static_cast<size_t>(t)][static_cast<size_t>(c)] -
                 seq.phi[static_cast<size_t>(t - 1)][static_cast<size_t>(c)]).squaredNorm();
        temp += (seq.tau[static_cast<size_t>(t)][static_cast<size_t>(c)] -
                 seq.tau[static_cast<size_t>(t - 1)][static_cast<size_t>(c)]).squaredNorm();
      }
    }
  }

  LossResult r;
  const double j2d_w = w.j2d * j2d;
  const double vposer_w = w.vposer * vposer;
  const double temp_w = w.temp * temp;
  const double beta_w = w.beta * seq.beta.squaredNorm();
  r.terms = {{"j2d", j2d_w}, {"vposer", vposer_w}, {"temp", temp_w}, {"beta", beta_w}};
  r.total = j2d_w + vposer_w + temp_w + beta_w;
  return r;
}

}  // namespace airpose

#pragma once

#include <limits>

#include "airpose/descent.hpp"
#include "airpose/gradients.hpp"
#include "airpose/losses.hpp"

namespace airpose {

struct OptimizerConfig {
  int max_iterations = 400;
  double initial_step = 0.05;
  double tolerance = 1e-8;  // relative loss decrease
  double armijo_c = 1e-4;
  double step_grow = 1.5;
  double step_shrink = 0.5;
  double min_step = 1e-18;
  LossWeights weights = loss_weights_preset("eq8-airpose-plus");
  double sigma = kDefaultGemanMcclureSigmaPx;
  double conf_threshold = kDefaultConfidenceThreshold;
};

// Seeds the sequence estimate from per-frame per-camera estimates: shape is
// the grand mean, the shared latent pose encodes the per-frame mean of the
// two cameras' poses, root pose/translation copy through per camera.
inline SequenceEstimate init_from_airpose(const std::vector<std::array<BodyParams, 2>>& frames,
                                          const Model& model) {
  if (frames.empty()) throw EmptySequence("init_from_airpose: no frames");
  SequenceEstimate seq;
  seq.beta.setZero();
  for (const auto& f : frames) {
    seq.beta += f[0].beta + f[1].beta;
    const ThetaVec mean_theta = 0.5 * (f[0].theta + f[1].theta);
    seq.v.push_back(prior_encode<double>(mean_theta, model.prior));
    seq.phi.push_back({f[0].phi, f[1].phi});
    seq.tau.push_back({f[0].tau, f[1].tau});
  }
  seq.beta /= 2.0 * static_cast<double>(frames.size());
  return seq;
}

struct RefineResult {
  SequenceEstimate estimate;
  std::vector<double> loss_trace;  // value at init plus one entry per accepted step
  int iterations = 0;
};

namespace detail {

inline int find_nonfinite_frame(const Model& m, const SequenceEstimate& seq,
                                const SequenceObservations& obs, const LossWeights& w,
                                double sigma, double conf_threshold) {
  for (int t = 0; t < seq.frames(); ++t) {
    const ThetaVec theta = prior_decode<double>(seq.v[static_cast<size_t>(t)], m.prior);
    for (int c = 0; c < 2; ++c) {
      BodyParams p;
      p.tau = seq.tau[static_cast<size_t>(t)][static_cast<size_t>(c)];
      p.phi = seq.phi[static_cast<size_t>(t)][static_cast<size_t>(c)];
      p.theta = theta;
      p.beta = seq.beta;
      try {
        if (!frame_gated(obs.keypoints[static_cast<size_t>(t)], conf_threshold)) {
          const double v = robust_reprojection<double>(
              m, p, obs.keypoints[static_cast<size_t>(t)][static_cast<size_t>(c)],
              obs.cameras[static_cast<size_t>(t)][static_cast<size_t>(c)].K,
              obs.cameras[static_cast<size_t>(t)][static_cast<size_t>(c)].P, sigma);
          if (!std::isfinite(v)) return t;
        }
      } catch (const Error&) {
        return t;
      }
    }
  }
  return -1;
}

}  // namespace detail

// First-order batch descent with backtracking line search on the
// whole-sequence objective. The descent direction is the gradient scaled by a
// fixed per-block diagonal preconditioner estimated once at the start, so the
// method stays deterministic and the accepted-loss trace is strictly
// non-increasing.
inline RefineResult refine(const Model& model, const SequenceEstimate& init,
                           const SequenceObservations& obs, const OptimizerConfig& cfg) {
  const int T_frames = init.frames();
  if (T_frames < 2) throw SequenceTooShort("refine: sequence length must be >= 2");

  auto value_or_inf = [&](const SequenceEstimate& s) -> double {
    try {
      return loss_airpose_plus(model, s, obs, cfg.weights, cfg.sigma, cfg.conf_threshold).total;
    } catch (const BehindCamera&) {
      return std::numeric_limits<double>::infinity();
    } catch (const DegenerateRotation&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  RefineResult result;
  Eigen::VectorXd x = pack_sequence(init);
  double fx = value_or_inf(init);
  if (!std::isfinite(fx)) {
    const int bad = detail::find_nonfinite_frame(model, init, obs, cfg.weights, cfg.sigma,
                                                 cfg.conf_threshold);
    throw NonFiniteObjective("refine: non-finite objective at frame " + std::to_string(bad));
  }
  result.loss_trace.push_back(fx);

  // Descent direction from the shared preconditioned-CG rule (the
  // shape/latent/root blocks carry very different curvature scales, and
  // per-camera depth is far less observable than the image-plane
  // directions); Armijo backtracking keeps the accepted-loss trace strictly
  // non-increasing.
  CgDirection direction;
  double step = cfg.initial_step;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const SequenceEstimate current = unpack_sequence(x, T_frames);
    const Eigen::VectorXd g =
        grad_loss_airpose_plus(model, current, obs, cfg.weights, cfg.sigma, cfg.conf_threshold);
    if (!g.allFinite()) throw NonFiniteObjective("refine: non-finite gradient");

    const Eigen::VectorXd dir = direction(g);
    const double slope = g.dot(dir);
    if (slope <= 0.0) break;

    bool accepted = false;
    while (step > cfg.min_step) {
      const Eigen::VectorXd trial = x - step * dir;
      const double ft = value_or_inf(unpack_sequence(trial, T_frames));
      if (ft <= fx - cfg.armijo_c * step * slope) {
        const double drop = (fx - ft) / std::max(fx, 1e-300);
        x = trial;
        fx = ft;
        result.loss_trace.push_back(fx);
        accepted = true;
        step *= cfg.step_grow;
        ++result.iterations;
        if (drop < cfg.tolerance) {
          result.estimate = unpack_sequence(x, T_frames);
          return result;
        }
        break;
      }
      step *= cfg.step_shrink;
    }
    if (!accepted) break;
  }
  result.estimate = unpack_sequence(x, T_frames);
  return result;
}

struct RelativePose {
  Mat3d rotation = Mat3d::Identity();
  Vec3d translation = Vec3d::Zero();
};

// Pose of camera 2 expressed in camera 1's frame, per frame, from the two
// cameras' body-relative estimates: T_c1<-c2 = T_c1<-body o inverse(T_c2<-body).
inline std::vector<RelativePose> relative_camera_trajectory(const SequenceEstimate& seq) {
  std::vector<RelativePose> out;
  out.reserve(static_cast<size_t>(seq.frames()));
  for (int t = 0; t < seq.frames(); ++t) {
    const Mat3d r1 = rot6d_decode<double>(seq.phi[static_cast<size_t>(t)][0]);
    const Mat3d r2 = rot6d_decode<double>(seq.phi[static_cast<size_t>(t)][1]);
    RelativePose rel;
    rel.rotation = r1 * r2.transpose();
    rel.translation = seq.tau[static_cast<size_t>(t)][0] - rel.rotation * seq.tau[static_cast<size_t>(t)][1];
    out.push_back(rel);
  }
  return out;
}

}  // namespace airpose

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>

#include "airpose/descent.hpp"
#include "airpose/gradients.hpp"
#include "airpose/losses.hpp"
#include "airpose/rng.hpp"
#include "airpose/wire.hpp"

namespace airpose {

// Ablation modes. Multiview adds the partner exchange, Fullcam adds the crop
// descriptor P; AirPose is both. The mode fixes the output frame of the
// gradient refiner: crop frame without P, full camera frame with it.
enum class EstimatorMode { Baseline, BaselineMultiview, BaselineFullcam, AirPose };

inline bool mode_exchanges(EstimatorMode m) {
  return m == EstimatorMode::BaselineMultiview || m == EstimatorMode::AirPose;
}

inline bool mode_uses_crop(EstimatorMode m) {
  return m == EstimatorMode::BaselineFullcam || m == EstimatorMode::AirPose;
}

inline EstimatorMode parse_mode(std::string_view s) {
  if (s == "baseline") return EstimatorMode::Baseline;
  if (s == "multiview") return EstimatorMode::BaselineMultiview;
  if (s == "fullcam") return EstimatorMode::BaselineFullcam;
  if (s == "airpose") return EstimatorMode::AirPose;
  throw ConfigError("unknown mode: " + std::string(s));
}

inline const char* mode_name(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::Baseline: return "baseline";
    case EstimatorMode::BaselineMultiview: return "multiview";
    case EstimatorMode::BaselineFullcam: return "fullcam";
    case EstimatorMode::AirPose: return "airpose";
  }
  return "?";
}

// Detector output as the estimator consumes it: keypoints relative to the
// crop center (full-pixel scale). A crop-based detector cannot report where
// its crop sits in the full image, so this transform carries exactly the
// information the cropped network input carries; only the P descriptor (in
// Fullcam/AirPose modes) restores full-image placement.
inline KeypointObservation crop_relative_observation(const KeypointObservation& full,
                                                     const CropParams& P, const Intrinsics& K) {
  KeypointObservation out = full;
  const Vec2d center((1.0 + P.bx) * K.cx, (1.0 + P.by) * K.cy);
  for (auto& kp : out.joints) kp.J -= center;
  return out;
}

// Everything one refinement stage may consume. `observation` is crop-relative
// (see crop_relative_observation); `current` is the working state with
// normalized tau; `crop` is present in Fullcam/AirPose modes; the partner
// fields are present iff a Multiview/AirPose exchange delivered them.
struct StageInput {
  KeypointObservation observation;
  Intrinsics intrinsics;
  std::optional<CropParams> crop;
  BodyParams current;
  std::optional<ThetaVec> partner_theta;
  std::optional<ShapeVec> partner_beta;
  int stage_index = 0;
};

struct RefinerConfig {
  // gradient refiner
  int steps = 10;
  double initial_step = 2e-3;
  double w_j2d = 0.01;
  double w_vposer = 0.1;
  double w_beta_prior = 1.0;
  double w_partner_theta = 1.0;
  double w_partner_beta = 1.0;
  double sigma_px = kDefaultGemanMcclureSigmaPx;
  // oracle refiner
  double oracle_alpha = 0.5;
  double oracle_noise_sigma = 0.0;
};

// Fixed network initialization: zero shape, identity rotations, normalized
// tau of [0, 0, 0.5] (10 m depth after denormalization).
inline BodyParams init_params() {
  BodyParams p;
  p.tau = Vec3d(0, 0, 0.5);
  return p;
}

// One refinement stage. Implementations keep per-agent state (step-size warm
// starts, noise streams) and define which frame their working tau lives in.
class StageRefiner {
 public:
  virtual ~StageRefiner() = default;
  virtual BodyParams refine(const StageInput& input) = 0;
  // Convert the final working state (normalized tau) to the mode's output
  // frame in meters.
  virtual BodyParams finalize(const BodyParams& state, const std::optional<CropParams>& crop,
                              const Intrinsics& K) const = 0;
  virtual void reset_frame() {}
};

// Damped gradient descent on the per-frame objective
//   w_j2d * robust reprojection + w_vposer ||E(theta)||^2
//   (+ partner coupling on theta/beta when present),
// with tau handled in the crop frame: without P the reprojection uses the
// crop-frame camera as-is, with P it goes through crop_to_full.
class GradientRefiner : public StageRefiner {
 public:
  GradientRefiner(const Model& model, RefinerConfig cfg) : model_(&model), cfg_(cfg) {}

  // Stage objective at a given working state (normalized tau).
  double objective(const StageInput& input, const BodyParams& state) const {
    const Eigen::VectorXd x = pack_body_params(state);
    return objective_impl(input, x.data());
  }

  // Objective value after stage entry and after each accepted step of the
  // latest refine() call; strictly decreasing by construction.
  const std::vector<double>& objective_trace() const { return trace_; }

  BodyParams refine(const StageInput& input) override {
    auto value_at = [&](const Eigen::VectorXd& x) -> double {
      try {
        return objective_impl(input, x.data());
      } catch (const BehindCamera&) {
        return std::numeric_limits<double>::infinity();
      } catch (const DegenerateRotation&) {
        return std::numeric_limits<double>::infinity();
      }
    };

    Eigen::VectorXd x = pack_body_params(input.current);
    double fx = value_at(x);
    if (!std::isfinite(fx))
      throw NonFiniteObjective("gradient refiner: non-finite objective at stage entry");
    trace_.clear();
    trace_.push_back(fx);

    CgDirection direction;  // fresh memory per stage; the objective changes
    for (int step = 0; step < cfg_.steps; ++step) {
      const Eigen::VectorXd g =
          forward_gradient(x, [&](const auto* xx) { return objective_impl(input, xx); });
      if (!g.allFinite()) throw NonFiniteObjective("gradient refiner: non-finite gradient");
      if (g.squaredNorm() == 0.0) break;
      const Eigen::VectorXd dir = direction(g);
      const double slope = g.dot(dir);
      if (slope <= 0.0) break;
      bool accepted = false;
      while (step_ > 1e-16) {
        const Eigen::VectorXd trial = x - step_ * dir;
        const double ft = value_at(trial);
        if (ft < fx - 1e-4 * step_ * slope) {
          x = trial;
          fx = ft;
          trace_.push_back(fx);
          accepted = true;
          step_ *= 2.0;
          break;
        }
        step_ *= 0.5;
      }
      if (!accepted) break;
    }
    return unpack_body_params<double>(x.data());
  }

  BodyParams finalize(const BodyParams& state, const std::optional<CropParams>& crop,
                      const Intrinsics& K) const override {
    BodyParams out = state;
    out.tau = tau_denormalize<double>(state.tau);
    if (crop) out.tau = crop_to_full<double>(out.tau, *crop, K);
    return out;
  }

  void reset_frame() override { step_ = cfg_.initial_step; }

 private:
  // Confidence-weighted robust reprojection onto crop-relative observations.
  // Without P the model assumes a centered unit crop (the baseline's blind
  // spot); with P the projection goes through crop_to_full and the true crop
  // center, so the full-frame placement is recoverable.
  template <typename T>
  T objective_impl(const StageInput& input, const T* xx) const {
    const CropParams P = input.crop.value_or(CropParams{0, 0, 1});
    const Intrinsics& K = input.intrinsics;
    const Vec2d center((1.0 + P.bx) * K.cx, (1.0 + P.by) * K.cy);
    BodyParamsT<T> s = unpack_body_params<T>(xx);
    s.tau = tau_denormalize<T>(s.tau);

    BodyParamsT<T> full = s;
    full.tau = crop_to_full<T>(s.tau, P, K);
    const Eigen::Matrix<T, 3, kNumJoints> est = joints<T>(full, model_->body);
    T obj(0);
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = input.observation.joints[static_cast<size_t>(j)].w;
      if (w == 0.0) continue;
      const Vec2<T> uv = project<T>(est.col(j).eval(), K);
      const T du = uv.x() - T(center.x()) - T(input.observation.joints[static_cast<size_t>(j)].J.x());
      const T dv = uv.y() - T(center.y()) - T(input.observation.joints[static_cast<size_t>(j)].J.y());
      obj += w * (geman_mcclure<T>(du, cfg_.sigma_px) + geman_mcclure<T>(dv, cfg_.sigma_px));
    }
    obj = cfg_.w_j2d * obj;
    obj += cfg_.w_vposer * prior_encode<T>(s.theta, model_->prior).squaredNorm();
    obj += cfg_.w_beta_prior * s.beta.squaredNorm();
    if (input.partner_theta) {
      T d2(0);
      for (int i = 0; i < kThetaDim; ++i) {
        const T d = s.theta[i] - T((*input.partner_theta)[i]);
        d2 += d * d;
      }
      obj += cfg_.w_partner_theta * d2;
    }
    if (input.partner_beta) {
      T d2(0);
      for (int i = 0; i < kShapeDim; ++i) {
        const T d = s.beta[i] - T((*input.partner_beta)[i]);
        d2 += d * d;
      }
      obj += cfg_.w_partner_beta * d2;
    }
    return obj;
  }

  const Model* model_;
  RefinerConfig cfg_;
  double step_ = 2e-4;
  std::vector<double> trace_;
};

// Test fixture: averages any partner payload into theta/beta, then moves the
// state a fraction alpha toward per-camera ground truth plus seeded Gaussian
// noise. With alpha = 1, sigma = 0 the output is ground truth exactly.
// Working tau is full-camera-frame, normalized.
class OracleNoiseRefiner : public StageRefiner {
 public:
  OracleNoiseRefiner(RefinerConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  void set_ground_truth(const BodyParams& gt_full_frame) {
    gt_ = gt_full_frame;
    gt_.tau = tau_normalize<double>(gt_.tau);
  }

  BodyParams refine(const StageInput& input) override {
    BodyParams s = input.current;
    if (input.partner_theta) s.theta = 0.5 * (s.theta + *input.partner_theta);
    if (input.partner_beta) s.beta = 0.5 * (s.beta + *input.partner_beta);
    const double a = cfg_.oracle_alpha;
    auto pull = [&](auto& field, const auto& target) {
      field += a * (target - field);
      for (int i = 0; i < field.size(); ++i) field[i] += cfg_.oracle_noise_sigma * rng_.normal();
    };
    pull(s.tau, gt_.tau);
    pull(s.phi, gt_.phi);
    pull(s.theta, gt_.theta);
    pull(s.beta, gt_.beta);
    return s;
  }

  BodyParams finalize(const BodyParams& state, const std::optional<CropParams>&,
                      const Intrinsics&) const override {
    BodyParams out = state;
    out.tau = tau_denormalize<double>(state.tau);
    return out;
  }

 private:
  RefinerConfig cfg_;
  Rng rng_;
  BodyParams gt_;
};

enum class RefinerKind { Gradient, Oracle };

inline RefinerKind parse_refiner(std::string_view s) {
  if (s == "gradient") return RefinerKind::Gradient;
  if (s == "oracle") return RefinerKind::Oracle;
  throw ConfigError("unknown refiner: " + std::string(s));
}

// Sends this agent's stage message and returns the partner's same-stage
// (theta, beta). Throws ExchangeTimeout when the partner payload never
// arrives; the protocol layer decides what that means.
using ExchangeFn = std::function<std::pair<ThetaVec, ShapeVec>(const StageMessage&)>;

struct ThreeStageResult {
  BodyParams output;                    // finalized, meters, mode-defined frame
  std::vector<StageMessage> outbound;   // exactly 2 in exchanging modes, else 0
};

// Runs the three autoregression stages for one frame on one agent. In
// exchanging modes a message is emitted after stages 0 and 1 and the partner
// payload feeds the next stage.
inline ThreeStageResult run_three_stages(std::int64_t frame_id, const KeypointObservation& obs,
                                         const Intrinsics& K, const CropParams& P,
                                         EstimatorMode mode, StageRefiner& refiner,
                                         const ExchangeFn& exchange = {}) {
  ThreeStageResult result;
  refiner.reset_frame();
  StageInput input;
  input.observation = obs;
  input.intrinsics = K;
  if (mode_uses_crop(mode)) input.crop = P;
  input.current = init_params();

  for (int stage = 0; stage < 3; ++stage) {
    input.stage_index = stage;
    input.current = refiner.refine(input);
    if (stage < 2 && mode_exchanges(mode)) {
      const StageMessage msg = make_stage_message(frame_id, static_cast<std::uint8_t>(stage),
                                                  input.current.theta, input.current.beta);
      result.outbound.push_back(msg);
      if (exchange) {
        auto [partner_theta, partner_beta] = exchange(msg);
        input.partner_theta = partner_theta;
        input.partner_beta = partner_beta;
      }
    }
  }
  result.output = refiner.finalize(input.current, input.crop, K);
  return result;
}

}  // namespace airpose

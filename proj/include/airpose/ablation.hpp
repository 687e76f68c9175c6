#pragma once

#include "airpose/estimator.hpp"
#include "airpose/metrics.hpp"
#include "airpose/synthgen.hpp"

namespace airpose {

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

inline std::uint64_t dataset_hash(const std::vector<FrameRecord>& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_d = [&](double v) { fnv1a(h, &v, sizeof(v)); };
  for (const auto& rec : dataset) {
    fnv1a(h, &rec.frame_id, sizeof(rec.frame_id));
    fnv1a(h, &rec.shutter_timestamp_ns, sizeof(rec.shutter_timestamp_ns));
    for (const auto& cam : rec.cameras) {
      mix_d(cam.intrinsics.fx);
      mix_d(cam.intrinsics.fy);
      mix_d(cam.intrinsics.cx);
      mix_d(cam.intrinsics.cy);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) mix_d(cam.pose.rotation(r, c));
      for (int i = 0; i < 3; ++i) mix_d(cam.pose.translation[i]);
      mix_d(cam.crop.bx);
      mix_d(cam.crop.by);
      mix_d(cam.crop.s);
      for (const auto& kp : cam.keypoints.joints) {
        mix_d(kp.J.x());
        mix_d(kp.J.y());
        mix_d(kp.w);
      }
    }
    for (int i = 0; i < 3; ++i) mix_d(rec.gt_world.tau[i]);
    for (int i = 0; i < 6; ++i) mix_d(rec.gt_world.phi[i]);
    for (int i = 0; i < kThetaDim; ++i) mix_d(rec.gt_world.theta[i]);
    for (int i = 0; i < kShapeDim; ++i) mix_d(rec.gt_world.beta[i]);
  }
  return h;
}

}  // namespace detail

// Per-frame estimation over a dataset without the timing layer: same-frame
// blocking exchange with float32 message quantization, one refiner instance
// per agent.
inline std::vector<std::array<BodyParams, 2>> estimate_frames(
    const Model& model, const std::vector<FrameRecord>& dataset, EstimatorMode mode,
    RefinerKind refiner_kind, const RefinerConfig& rcfg, std::uint64_t seed) {
  std::array<std::unique_ptr<GradientRefiner>, 2> gradient;
  std::array<std::unique_ptr<OracleNoiseRefiner>, 2> oracle;
  std::array<StageRefiner*, 2> refiners{};
  for (int a = 0; a < 2; ++a) {
    if (refiner_kind == RefinerKind::Gradient) {
      gradient[static_cast<size_t>(a)] = std::make_unique<GradientRefiner>(model, rcfg);
      refiners[static_cast<size_t>(a)] = gradient[static_cast<size_t>(a)].get();
    } else {
      oracle[static_cast<size_t>(a)] = std::make_unique<OracleNoiseRefiner>(
          rcfg, Rng::derive_seed(seed, 0xab7 + static_cast<std::uint64_t>(a)));
      refiners[static_cast<size_t>(a)] = oracle[static_cast<size_t>(a)].get();
    }
  }

  std::vector<std::array<BodyParams, 2>> out;
  out.reserve(dataset.size());
  const bool exchanging = mode_exchanges(mode);
  for (const FrameRecord& rec : dataset) {
    std::array<StageInput, 2> inputs;
    for (int a = 0; a < 2; ++a) {
      inputs[static_cast<size_t>(a)].observation = crop_relative_observation(
          rec.cameras[static_cast<size_t>(a)].keypoints, rec.cameras[static_cast<size_t>(a)].crop,
          rec.cameras[static_cast<size_t>(a)].intrinsics);
      inputs[static_cast<size_t>(a)].intrinsics = rec.cameras[static_cast<size_t>(a)].intrinsics;
      if (mode_uses_crop(mode)) inputs[static_cast<size_t>(a)].crop = rec.cameras[static_cast<size_t>(a)].crop;
      inputs[static_cast<size_t>(a)].current = init_params();
      if (oracle[static_cast<size_t>(a)]) {
        BodyParams gt;
        gt.tau = rec.tau_gt[static_cast<size_t>(a)];
        gt.phi = rec.phi_gt[static_cast<size_t>(a)];
        gt.theta = rec.gt_world.theta;
        gt.beta = rec.gt_world.beta;
        oracle[static_cast<size_t>(a)]->set_ground_truth(gt);
      }
      refiners[static_cast<size_t>(a)]->reset_frame();
    }
    std::array<BodyParams, 2> state;
    for (int stage = 0; stage < 3; ++stage) {
      for (int a = 0; a < 2; ++a) {
        inputs[static_cast<size_t>(a)].stage_index = stage;
        if (stage > 0) inputs[static_cast<size_t>(a)].current = state[static_cast<size_t>(a)];
        state[static_cast<size_t>(a)] = refiners[static_cast<size_t>(a)]->refine(inputs[static_cast<size_t>(a)]);
      }
      if (stage < 2 && exchanging) {
        std::array<StageMessage, 2> msgs;
        for (int a = 0; a < 2; ++a)
          msgs[static_cast<size_t>(a)] =
              make_stage_message(rec.frame_id, static_cast<std::uint8_t>(stage),
                                 state[static_cast<size_t>(a)].theta, state[static_cast<size_t>(a)].beta);
        for (int a = 0; a < 2; ++a) {
          inputs[static_cast<size_t>(a)].partner_theta = message_theta(msgs[static_cast<size_t>(1 - a)]);
          inputs[static_cast<size_t>(a)].partner_beta = message_beta(msgs[static_cast<size_t>(1 - a)]);
        }
      }
    }
    std::array<BodyParams, 2> finalized;
    for (int a = 0; a < 2; ++a)
      finalized[static_cast<size_t>(a)] = refiners[static_cast<size_t>(a)]->finalize(
          state[static_cast<size_t>(a)], inputs[static_cast<size_t>(a)].crop,
          inputs[static_cast<size_t>(a)].intrinsics);
    out.push_back(finalized);
  }
  return out;
}

struct AblationEntry {
  EstimatorMode mode = EstimatorMode::Baseline;
  EvalReport report;
  std::uint64_t input_hash = 0;
};

struct AblationResult {
  std::array<AblationEntry, 4> entries;
};

// Runs all four modes over bit-identical inputs (hash-guarded) and reports
// MPE/MPJPE per mode.
inline AblationResult run_ablation(const Model& model, const std::vector<FrameRecord>& dataset,
                                   RefinerKind refiner_kind, const RefinerConfig& rcfg,
                                   std::uint64_t seed) {
  AblationResult result;
  const std::array<EstimatorMode, 4> modes{EstimatorMode::Baseline, EstimatorMode::BaselineMultiview,
                                           EstimatorMode::BaselineFullcam, EstimatorMode::AirPose};
  for (std::size_t i = 0; i < modes.size(); ++i) {
    AblationEntry entry;
    entry.mode = modes[i];
    entry.input_hash = detail::dataset_hash(dataset);
    const auto estimates = estimate_frames(model, dataset, modes[i], refiner_kind, rcfg, seed);
    entry.report = evaluate(model, estimates, dataset);
    entry.report.mode = mode_name(modes[i]);
    entry.report.seed = seed;
    result.entries[i] = entry;
  }
  return result;
}

}  // namespace airpose

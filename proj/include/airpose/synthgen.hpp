#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "airpose/body_model.hpp"
#include "airpose/camera.hpp"
#include "airpose/losses.hpp"
#include "airpose/model.hpp"
#include "airpose/pose_prior.hpp"
#include "airpose/rng.hpp"

namespace airpose {

// World frame: Z up, person wandering around the origin, cameras on a ring
// facing the person box center.

enum class MotionPattern { Hover, Orbit, RandomWalk };

inline MotionPattern parse_motion_pattern(std::string_view s) {
  if (s == "hover") return MotionPattern::Hover;
  if (s == "orbit") return MotionPattern::Orbit;
  if (s == "randomwalk") return MotionPattern::RandomWalk;
  throw ConfigError("unknown motion pattern: " + std::string(s));
}

struct CameraMotionConfig {
  MotionPattern pattern = MotionPattern::Hover;
  double orbit_rate_deg_per_s = 12.0;
  double distance_m = 10.0;
  double distance_spread_m = 1.0;   // RandomWalk wander amplitude
  double pitch_deg = 25.0;          // within [0, 45]
  double azimuth_deg = 0.0;         // starting azimuth
};

struct SceneConfig {
  int frames = 100;
  double fps = 1000.0 / 240.0;
  std::uint64_t seed = 1;
  double person_range_m = 2.75;   // ground-plane box half side
  double person_height_m = 0.95;  // pelvis height
  double beta_sigma = 0.3;
  double latent_sigma = 1.0;      // stationary std of the pose random walk
  double latent_correlation_s = 1.5;
  std::array<CameraMotionConfig, 2> cameras{
      CameraMotionConfig{},
      CameraMotionConfig{.pattern = MotionPattern::Orbit, .azimuth_deg = 90.0}};
  Intrinsics intrinsics{1000, 1000, 960, 540, 1920, 1080};
};

struct NoiseConfig {
  double keypoint_sigma_px = 2.0;
  std::array<double, 2> occlusion_prob{0.0, 0.0};  // per camera, per joint
  double visible_conf_lo = 0.6, visible_conf_hi = 1.0;
  double occluded_conf_lo = 0.0, occluded_conf_hi = 0.3;
  double occluded_extra_sigma_px = 10.0;
  bool second_detector = false;
  double second_detector_sigma_px = 4.0;
  double second_detector_outlier_prob = 0.02;
  double second_detector_outlier_px = 300.0;
  double gate_threshold_px = 100.0;
  double crop_pad_fraction = 0.10;
  double crop_jitter_px = 0.0;
};

struct FrameCameraData {
  Intrinsics intrinsics;
  CameraPose pose;  // ground-truth world -> camera
  CropParams crop;
  KeypointObservation keypoints;
};

struct FrameRecord {
  std::int64_t frame_id = 0;
  std::int64_t shutter_timestamp_ns = 0;
  std::array<FrameCameraData, 2> cameras;
  BodyParams gt_world;               // world-frame ground truth body
  std::array<Vec3d, 2> tau_gt{};     // per-camera ground truth root translation
  std::array<Vec6d, 2> phi_gt{};     // per-camera ground truth root rotation
};

// Zeroes the confidence of joints whose two detections disagree by more than
// threshold_px (strictly greater; a displacement of exactly the threshold is
// kept).
inline KeypointObservation gate_keypoints(const KeypointObservation& primary,
                                          const KeypointObservation& secondary,
                                          double threshold_px = 100.0) {
  KeypointObservation out = primary;
  for (int j = 0; j < kNumJoints; ++j) {
    const double d = (primary.joints[static_cast<size_t>(j)].J -
                      secondary.joints[static_cast<size_t>(j)].J).norm();
    if (d > threshold_px) out.joints[static_cast<size_t>(j)].w = 0.0;
  }
  return out;
}

namespace detail {

// Camera at spherical position (azimuth, pitch, distance) around the aim
// point, looking straight at it; x right, y down, z forward.
inline CameraPose look_at_pose(double azimuth_rad, double pitch_rad, double distance,
                               const Vec3d& target) {
  const Vec3d offset(distance * std::cos(pitch_rad) * std::cos(azimuth_rad),
                     distance * std::cos(pitch_rad) * std::sin(azimuth_rad),
                     distance * std::sin(pitch_rad));
  const Vec3d position = target + offset;
  const Vec3d forward = (target - position).normalized();
  const Vec3d right = forward.cross(Vec3d::UnitZ()).normalized();
  const Vec3d down = forward.cross(right);
  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -pose.rotation * position;
  return pose;
}

struct CameraMotionState {
  double azimuth = 0, pitch = 0, distance = 10;
};

}  // namespace detail

inline void validate(const SceneConfig& scene, const NoiseConfig& noise) {
  if (scene.frames < 1) throw ConfigError("scene.frames must be >= 1");
  if (scene.fps <= 0) throw ConfigError("scene.fps must be positive");
  if (scene.person_range_m <= 0) throw ConfigError("scene.person_range_m must be positive");
  for (const auto& cam : scene.cameras) {
    if (cam.pitch_deg < 0 || cam.pitch_deg > 45)
      throw ConfigError("camera pitch must lie in [0, 45] degrees");
    if (cam.distance_m <= 0) throw ConfigError("camera distance must be positive");
  }
  for (double p : noise.occlusion_prob)
    if (p < 0 || p > 1) throw ConfigError("occlusion probability must lie in [0, 1]");
  if (noise.keypoint_sigma_px < 0) throw ConfigError("keypoint noise sigma must be >= 0");
}

inline std::vector<FrameRecord> generate_sequence(const Model& model, const SceneConfig& scene,
                                                  const NoiseConfig& noise) {
  validate(scene, noise);
  const double dt = 1.0 / scene.fps;
  Rng motion_rng(Rng::derive_seed(scene.seed, 1));
  Rng pose_rng(Rng::derive_seed(scene.seed, 2));
  Rng noise_rng(Rng::derive_seed(scene.seed, 3));

  ShapeVec beta;
  for (int k = 0; k < kShapeDim; ++k) beta[k] = scene.beta_sigma * pose_rng.normal();

  // Latent pose AR(1) with stationary std latent_sigma.
  const double rho = std::exp(-dt / scene.latent_correlation_s);
  const double innovation = scene.latent_sigma * std::sqrt(1.0 - rho * rho);
  LatentVec v;
  for (int i = 0; i < kLatentDim; ++i) v[i] = scene.latent_sigma * pose_rng.normal();

  // Person position: mean-reverting walk clamped to the box.
  Vec2d xy(motion_rng.uniform(-0.5, 0.5) * scene.person_range_m,
           motion_rng.uniform(-0.5, 0.5) * scene.person_range_m);
  double heading = motion_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double revert = 0.2;   // 1/s toward the box center
  const double walk_sigma = 0.6;  // m / sqrt(s)

  std::array<detail::CameraMotionState, 2> cam_state;
  for (int c = 0; c < 2; ++c) {
    const auto& cfg = scene.cameras[static_cast<size_t>(c)];
    cam_state[static_cast<size_t>(c)] = {cfg.azimuth_deg * std::numbers::pi / 180.0,
                                         cfg.pitch_deg * std::numbers::pi / 180.0, cfg.distance_m};
  }
  const Vec3d aim(0, 0, scene.person_height_m);

  std::vector<FrameRecord> out;
  out.reserve(static_cast<size_t>(scene.frames));
  for (int t = 0; t < scene.frames; ++t) {
    FrameRecord rec;
    rec.frame_id = t;
    rec.shutter_timestamp_ns = static_cast<std::int64_t>(std::llround(t * dt * 1e9));

    // person state
    if (t > 0) {
      for (int i = 0; i < 2; ++i) {
        xy[i] += -revert * xy[i] * dt + walk_sigma * std::sqrt(dt) * motion_rng.normal();
        xy[i] = std::clamp(xy[i], -scene.person_range_m, scene.person_range_m);
      }
      heading += 0.4 * std::sqrt(dt) * motion_rng.normal();
      for (int i = 0; i < kLatentDim; ++i) v[i] = rho * v[i] + innovation * pose_rng.normal();
    }
    rec.gt_world.tau = Vec3d(xy.x(), xy.y(), scene.person_height_m);
    rec.gt_world.phi = rot6d_encode(Eigen::AngleAxisd(heading, Vec3d::UnitZ()).toRotationMatrix());
    rec.gt_world.theta = prior_decode<double>(v, model.prior);
    rec.gt_world.beta = beta;

    const Eigen::Matrix<double, 3, kNumJoints> joints_world = joints<double>(rec.gt_world, model.body);
    const Mat3d r_world_body = rot6d_decode<double>(rec.gt_world.phi);

    for (int c = 0; c < 2; ++c) {
      const auto& cfg = scene.cameras[static_cast<size_t>(c)];
      auto& st = cam_state[static_cast<size_t>(c)];
      if (t > 0) {
        switch (cfg.pattern) {
          case MotionPattern::Hover:
            break;
          case MotionPattern::Orbit:
            st.azimuth += cfg.orbit_rate_deg_per_s * std::numbers::pi / 180.0 * dt;
            break;
          case MotionPattern::RandomWalk: {
            st.azimuth += 0.3 * std::sqrt(dt) * motion_rng.normal();
            st.pitch += 0.1 * std::sqrt(dt) * motion_rng.normal();
            st.pitch = std::clamp(st.pitch, 0.0, 45.0 * std::numbers::pi / 180.0);
            st.distance += -0.3 * (st.distance - cfg.distance_m) * dt +
                           cfg.distance_spread_m * 0.3 * std::sqrt(dt) * motion_rng.normal();
            st.distance = std::max(2.0, st.distance);
            break;
          }
        }
      }

      FrameCameraData& cam = rec.cameras[static_cast<size_t>(c)];
      cam.intrinsics = scene.intrinsics;
      cam.pose = detail::look_at_pose(st.azimuth, st.pitch, st.distance, aim);
      rec.tau_gt[static_cast<size_t>(c)] = cam.pose.rotation * rec.gt_world.tau + cam.pose.translation;
      rec.phi_gt[static_cast<size_t>(c)] = rot6d_encode(cam.pose.rotation * r_world_body);

      // exact projections first (they also define the crop box)
      std::array<Vec2d, kNumJoints> px;
      std::array<bool, kNumJoints> in_front{};
      double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
      for (int j = 0; j < kNumJoints; ++j) {
        const Vec3d pc = cam.pose.rotation * joints_world.col(j) + cam.pose.translation;
        in_front[static_cast<size_t>(j)] = pc.z() > 1e-6;
        if (!in_front[static_cast<size_t>(j)]) continue;
        px[static_cast<size_t>(j)] = project<double>(pc, cam.intrinsics);
        min_x = std::min(min_x, px[static_cast<size_t>(j)].x());
        min_y = std::min(min_y, px[static_cast<size_t>(j)].y());
        max_x = std::max(max_x, px[static_cast<size_t>(j)].x());
        max_y = std::max(max_y, px[static_cast<size_t>(j)].y());
      }

      BBox box{min_x, min_y, max_x - min_x, max_y - min_y};
      const double pad = noise.crop_pad_fraction;
      box.x0 -= 0.5 * pad * box.width;
      box.y0 -= 0.5 * pad * box.height;
      box.width *= 1.0 + pad;
      box.height *= 1.0 + pad;
      if (noise.crop_jitter_px > 0) {
        box.x0 += noise.crop_jitter_px * noise_rng.normal();
        box.y0 += noise.crop_jitter_px * noise_rng.normal();
      }
      const BBox sq = squarify_bbox(box);
      cam.crop = crop_params_from_bbox(sq.x0, sq.y0, sq.width, cam.intrinsics);

      for (int j = 0; j < kNumJoints; ++j) {
        Keypoint& kp = cam.keypoints.joints[static_cast<size_t>(j)];
        if (!in_front[static_cast<size_t>(j)]) {
          kp = Keypoint{};  // missing
          continue;
        }
        const bool inside = px[static_cast<size_t>(j)].x() >= 0 &&
                            px[static_cast<size_t>(j)].x() < cam.intrinsics.width &&
                            px[static_cast<size_t>(j)].y() >= 0 &&
                            px[static_cast<size_t>(j)].y() < cam.intrinsics.height;
        const bool occluded =
            noise_rng.bernoulli(noise.occlusion_prob[static_cast<size_t>(c)]) || !inside;
        double sigma = noise.keypoint_sigma_px;
        if (occluded) sigma += noise.occluded_extra_sigma_px;
        kp.J = px[static_cast<size_t>(j)] + Vec2d(sigma * noise_rng.normal(), sigma * noise_rng.normal());
        kp.w = occluded ? noise_rng.uniform(noise.occluded_conf_lo, noise.occluded_conf_hi)
                        : noise_rng.uniform(noise.visible_conf_lo, noise.visible_conf_hi);
      }

      if (noise.second_detector) {
        KeypointObservation secondary = cam.keypoints;
        for (int j = 0; j < kNumJoints; ++j) {
          Vec2d d(noise.second_detector_sigma_px * noise_rng.normal(),
                  noise.second_detector_sigma_px * noise_rng.normal());
          if (noise_rng.bernoulli(noise.second_detector_outlier_prob)) {
            const double ang = noise_rng.uniform(0.0, 2.0 * std::numbers::pi);
            d += noise.second_detector_outlier_px * Vec2d(std::cos(ang), std::sin(ang));
          }
          secondary.joints[static_cast<size_t>(j)].J += d;
        }
        cam.keypoints = gate_keypoints(cam.keypoints, secondary, noise.gate_threshold_px);
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace airpose

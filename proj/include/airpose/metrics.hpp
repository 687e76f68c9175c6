#pragma once

#include <vector>

#include "airpose/body_model.hpp"
#include "airpose/camera.hpp"
#include "airpose/synthgen.hpp"

namespace airpose {

struct EvalReport {
  double mpe_m = 0;
  double mpjpe_m = 0;
  std::vector<double> mpe_series;    // per evaluated frame, averaged over cameras
  std::vector<double> mpjpe_series;  // per evaluated frame
  int frames_evaluated = 0;
  std::uint64_t seed = 0;
  std::string mode;
};

namespace detail {

inline Vec3d camera_to_world(const Vec3d& p_cam, const CameraPose& pose) {
  return pose.rotation.transpose() * (p_cam - pose.translation);
}

}  // namespace detail

// Mean position error: estimates are converted to the world frame with the
// ground-truth extrinsics and compared to the world-frame ground truth root;
// mean Euclidean distance over both cameras and all evaluated frames.
inline double mpe(const std::vector<std::array<BodyParams, 2>>& estimates,
                  const std::vector<FrameRecord>& gt) {
  if (estimates.size() != gt.size()) throw ShapeMismatch("mpe: estimate/gt length mismatch");
  if (estimates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < estimates.size(); ++t)
    for (int c = 0; c < 2; ++c) {
      const Vec3d world = detail::camera_to_world(estimates[t][static_cast<size_t>(c)].tau,
                                                  gt[t].cameras[static_cast<size_t>(c)].pose);
      acc += (world - gt[t].gt_world.tau).norm();
    }
  return acc / (2.0 * static_cast<double>(estimates.size()));
}

// Root-aligned mean per-joint position error over 22 joints, both cameras and
// all evaluated frames, in the world frame.
inline double mpjpe(const Model& model, const std::vector<std::array<BodyParams, 2>>& estimates,
                    const std::vector<FrameRecord>& gt) {
  if (estimates.size() != gt.size()) throw ShapeMismatch("mpjpe: estimate/gt length mismatch");
  if (estimates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    const Eigen::Matrix<double, 3, kNumJoints> j_gt = joints<double>(gt[t].gt_world, model.body);
    for (int c = 0; c < 2; ++c) {
      const auto& pose = gt[t].cameras[static_cast<size_t>(c)].pose;
      const Eigen::Matrix<double, 3, kNumJoints> j_cam =
          joints<double>(estimates[t][static_cast<size_t>(c)], model.body);
      Eigen::Matrix<double, 3, kNumJoints> j_world;
      for (int j = 0; j < kNumJoints; ++j)
        j_world.col(j) = detail::camera_to_world(j_cam.col(j), pose);
      const Vec3d root_shift = j_gt.col(kRootJoint) - j_world.col(kRootJoint);
      for (int j = 0; j < kNumJoints; ++j)
        acc += (j_world.col(j) + root_shift - j_gt.col(j)).norm();
    }
  }
  return acc / (static_cast<double>(kNumJoints) * 2.0 * static_cast<double>(estimates.size()));
}

inline EvalReport evaluate(const Model& model,
                           const std::vector<std::array<BodyParams, 2>>& estimates,
                           const std::vector<FrameRecord>& gt) {
  EvalReport rep;
  rep.frames_evaluated = static_cast<int>(estimates.size());
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    const std::vector<std::array<BodyParams, 2>> one{estimates[t]};
    const std::vector<FrameRecord> gt_one{gt[t]};
    rep.mpe_series.push_back(mpe(one, gt_one));
    rep.mpjpe_series.push_back(mpjpe(model, one, gt_one));
  }
  for (double v : rep.mpe_series) rep.mpe_m += v;
  for (double v : rep.mpjpe_series) rep.mpjpe_m += v;
  if (!rep.mpe_series.empty()) {
    rep.mpe_m /= static_cast<double>(rep.mpe_series.size());
    rep.mpjpe_m /= static_cast<double>(rep.mpjpe_series.size());
  }
  return rep;
}

}  // namespace airpose

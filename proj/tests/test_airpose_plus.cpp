#include <catch2/catch_amalgamated.hpp>

#include "airpose/ablation.hpp"
#include "airpose/airpose_plus.hpp"
#include "airpose/dataset_io.hpp"
#include "airpose/metrics.hpp"
#include "helpers.hpp"

using namespace airpose;

namespace {
const Model& model() {
  static const Model m = make_default_model();
  return m;
}

SequenceObservations observations_from(const std::vector<FrameRecord>& dataset) {
  SequenceObservations obs;
  for (const auto& rec : dataset) {
    obs.keypoints.push_back({rec.cameras[0].keypoints, rec.cameras[1].keypoints});
    obs.cameras.push_back({CameraFrame{rec.cameras[0].intrinsics, {0, 0, 1}},
                           CameraFrame{rec.cameras[1].intrinsics, {0, 0, 1}}});
  }
  return obs;
}

std::vector<std::array<BodyParams, 2>> gt_estimates(const std::vector<FrameRecord>& dataset) {
  std::vector<std::array<BodyParams, 2>> out;
  for (const auto& rec : dataset) {
    std::array<BodyParams, 2> pair;
    for (int c = 0; c < 2; ++c) {
      pair[static_cast<size_t>(c)].tau = rec.tau_gt[static_cast<size_t>(c)];
      pair[static_cast<size_t>(c)].phi = rec.phi_gt[static_cast<size_t>(c)];
      pair[static_cast<size_t>(c)].theta = rec.gt_world.theta;
      pair[static_cast<size_t>(c)].beta = rec.gt_world.beta;
    }
    out.push_back(pair);
  }
  return out;
}

std::vector<std::array<BodyParams, 2>> seq_to_estimates(const SequenceEstimate& seq,
                                                        const Model& m) {
  std::vector<std::array<BodyParams, 2>> out;
  for (int t = 0; t < seq.frames(); ++t) {
    std::array<BodyParams, 2> pair;
    for (int c = 0; c < 2; ++c) {
      pair[static_cast<size_t>(c)].tau = seq.tau[static_cast<size_t>(t)][static_cast<size_t>(c)];
      pair[static_cast<size_t>(c)].phi = seq.phi[static_cast<size_t>(t)][static_cast<size_t>(c)];
      pair[static_cast<size_t>(c)].theta = prior_decode<double>(seq.v[static_cast<size_t>(t)], m.prior);
      pair[static_cast<size_t>(c)].beta = seq.beta;
    }
    out.push_back(pair);
  }
  return out;
}
}  // namespace

TEST_CASE("init_from_airpose averages shape and encodes the mean pose") {
  Rng rng(401);
  std::vector<std::array<BodyParams, 2>> frames;
  for (int t = 0; t < 4; ++t) {
    BodyParams a = airpose::testing::random_params(rng, 0.3, 0.2);
    a.tau.z() = 7;
    frames.push_back({a, a});
  }
  const SequenceEstimate seq = init_from_airpose(frames, model());
  REQUIRE(seq.frames() == 4);
  for (int t = 0; t < 4; ++t) {
    CHECK((seq.v[static_cast<size_t>(t)] -
           prior_encode<double>(frames[static_cast<size_t>(t)][0].theta, model().prior))
              .cwiseAbs().maxCoeff() < 1e-12);
    CHECK(seq.tau[static_cast<size_t>(t)][0] == frames[static_cast<size_t>(t)][0].tau);
  }

  SECTION("cameras disagreeing: latent encodes the arithmetic mean") {
    std::vector<std::array<BodyParams, 2>> mixed = frames;
    mixed[0][1].theta.array() += 0.1;
    const SequenceEstimate s2 = init_from_airpose(mixed, model());
    const ThetaVec mean = 0.5 * (mixed[0][0].theta + mixed[0][1].theta);
    CHECK((s2.v[0] - prior_encode<double>(mean, model().prior)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("empty input throws") {
    CHECK_THROWS_AS(init_from_airpose({}, model()), EmptySequence);
  }
}

TEST_CASE("refine on a noiseless sequence recovers ground truth") {
  SceneConfig scene;
  scene.frames = 10;
  scene.seed = 402;
  scene.latent_sigma = 0.8;
  scene.beta_sigma = 0.0;  // template-shape body: the pinned shape regularizer
                           // otherwise biases the optimum away from gt
  NoiseConfig noise;
  noise.keypoint_sigma_px = 0.0;
  noise.visible_conf_lo = 1.0;
  noise.visible_conf_hi = 1.0;
  const auto dataset = generate_sequence(model(), scene, noise);
  const SequenceObservations obs = observations_from(dataset);

  // Start from a perturbed version of ground truth (an AirPose-like init).
  Rng rng(403);
  auto init_frames = gt_estimates(dataset);
  for (auto& pair : init_frames)
    for (auto& params : pair) {
      params.tau += Vec3d(0.05 * rng.normal(), 0.05 * rng.normal(), 0.15 * rng.normal());
      for (int i = 0; i < 6; ++i) params.phi[i] += 0.02 * rng.normal();
      for (int i = 0; i < kThetaDim; ++i) params.theta[i] += 0.03 * rng.normal();
      for (int i = 0; i < kShapeDim; ++i) params.beta[i] += 0.05 * rng.normal();
    }
  const SequenceEstimate init = init_from_airpose(init_frames, model());

  OptimizerConfig cfg;
  cfg.max_iterations = 500;
  cfg.tolerance = 1e-12;
  const RefineResult result = refine(model(), init, obs, cfg);

  // monotone trace
  for (std::size_t i = 1; i < result.loss_trace.size(); ++i)
    CHECK(result.loss_trace[i] <= result.loss_trace[i - 1]);
  CHECK(result.loss_trace.back() < result.loss_trace.front());

  const double mpjpe_init = mpjpe(model(), seq_to_estimates(init, model()), dataset);
  const double mpjpe_out = mpjpe(model(), seq_to_estimates(result.estimate, model()), dataset);
  const double mpe_out = mpe(seq_to_estimates(result.estimate, model()), dataset);
  CHECK(mpjpe_out < mpjpe_init);
  CHECK(mpjpe_out < 0.02);
  CHECK(mpe_out < 0.01);
}

TEST_CASE("refine stops immediately at an already-optimal input") {
  // Constant-in-time sequence whose observations are fit exactly by v = 0,
  // beta = 0: every objective term is zero, so the input is the global
  // optimum and the gradient vanishes identically.
  const Intrinsics K{1000, 1000, 500, 500, 1000, 1000};
  BodyParams cam0;
  cam0.tau = Vec3d(0.1, -0.2, 7);
  BodyParams cam1;
  cam1.tau = Vec3d(-0.2, 0.1, 9);

  SequenceEstimate seq;
  SequenceObservations obs;
  for (int t = 0; t < 4; ++t) {
    seq.v.push_back(LatentVec::Zero());
    seq.phi.push_back({cam0.phi, cam1.phi});
    seq.tau.push_back({cam0.tau, cam1.tau});
    KeypointObservation o0, o1;
    const auto j0 = joints<double>(cam0, model().body);
    const auto j1 = joints<double>(cam1, model().body);
    for (int j = 0; j < kNumJoints; ++j) {
      o0.joints[static_cast<size_t>(j)] = {project<double>(j0.col(j).eval(), K), 1.0};
      o1.joints[static_cast<size_t>(j)] = {project<double>(j1.col(j).eval(), K), 1.0};
    }
    obs.keypoints.push_back({o0, o1});
    obs.cameras.push_back({CameraFrame{K, {0, 0, 1}}, CameraFrame{K, {0, 0, 1}}});
  }

  const RefineResult r = refine(model(), seq, obs, OptimizerConfig{});
  CHECK(r.iterations <= 1);
  CHECK(r.loss_trace.front() == Catch::Approx(0.0).margin(1e-18));
  CHECK((pack_sequence(r.estimate) - pack_sequence(seq)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("refine rejects short sequences and reports non-finite frames") {
  SequenceEstimate seq;
  seq.v.resize(1, LatentVec::Zero());
  seq.phi.resize(1);
  seq.tau.resize(1);
  SequenceObservations obs;
  obs.keypoints.resize(1);
  obs.cameras.resize(1, {CameraFrame{{1000, 1000, 500, 500, 1000, 1000}, {0, 0, 1}},
                         CameraFrame{{1000, 1000, 500, 500, 1000, 1000}, {0, 0, 1}}});
  CHECK_THROWS_AS(refine(model(), seq, obs, OptimizerConfig{}), SequenceTooShort);

  // A body behind the camera makes the objective non-finite at init.
  seq.v.resize(2, LatentVec::Zero());
  seq.phi.resize(2, {identity_rot6d(), identity_rot6d()});
  seq.tau.resize(2, {Vec3d(0, 0, -5), Vec3d(0, 0, 5)});
  obs.keypoints.resize(2);
  for (auto& frame : obs.keypoints)
    for (auto& cam : frame)
      for (auto& kp : cam.joints) kp.w = 1.0;
  obs.cameras.resize(2, obs.cameras[0]);
  CHECK_THROWS_AS(refine(model(), seq, obs, OptimizerConfig{}), NonFiniteObjective);
}

TEST_CASE("relative camera trajectory") {
  SECTION("identical estimates and extrinsics give the identity") {
    SequenceEstimate seq;
    seq.v.resize(3, LatentVec::Zero());
    Rng rng(405);
    for (int t = 0; t < 3; ++t) {
      const Vec6d phi = airpose::testing::random_rot6d(rng);
      const Vec3d tau(rng.normal(), rng.normal(), 5 + rng.uniform());
      seq.phi.push_back({phi, phi});
      seq.tau.push_back({tau, tau});
    }
    for (const auto& rel : relative_camera_trajectory(seq)) {
      CHECK((rel.rotation - Mat3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(rel.translation.norm() < 1e-12);
    }
  }

  SECTION("ground-truth inputs recover the extrinsic composition") {
    SceneConfig scene;
    scene.frames = 5;
    scene.seed = 406;
    scene.cameras[1].pattern = MotionPattern::Orbit;
    NoiseConfig noise;
    const auto dataset = generate_sequence(model(), scene, noise);
    const SequenceEstimate seq = init_from_airpose(gt_estimates(dataset), model());
    const auto rel = relative_camera_trajectory(seq);
    for (std::size_t t = 0; t < dataset.size(); ++t) {
      const Mat3d r1 = dataset[t].cameras[0].pose.rotation;
      const Mat3d r2 = dataset[t].cameras[1].pose.rotation;
      const Vec3d t1 = dataset[t].cameras[0].pose.translation;
      const Vec3d t2 = dataset[t].cameras[1].pose.translation;
      const Mat3d r_expected = r1 * r2.transpose();
      const Vec3d t_expected = t1 - r_expected * t2;
      CHECK((rel[t].rotation - r_expected).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((rel[t].translation - t_expected).norm() < 1e-9);
    }
  }

  SECTION("a small rotation of camera 2 rotates the relative pose accordingly") {
    SequenceEstimate seq;
    seq.v.resize(2, LatentVec::Zero());
    seq.phi.resize(2, {identity_rot6d(), identity_rot6d()});
    seq.tau.resize(2, {Vec3d(0, 0, 5), Vec3d(0, 0, 5)});
    const double eps = 1e-3;
    const Mat3d r_eps = Eigen::AngleAxisd(eps, Vec3d::UnitZ()).toRotationMatrix();
    seq.phi[1][1] = rot6d_encode(r_eps);
    const auto rel = relative_camera_trajectory(seq);
    const Eigen::AngleAxisd aa(rel[1].rotation);
    CHECK(aa.angle() == Catch::Approx(eps).epsilon(1e-6));
  }
}

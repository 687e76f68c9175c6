#include <catch2/catch_amalgamated.hpp>

#include "airpose/ablation.hpp"
#include "airpose/estimator.hpp"
#include "helpers.hpp"

using namespace airpose;

namespace {
const Model& model() {
  static const Model m = make_default_model();
  return m;
}

Intrinsics make_k() { return {1000, 1000, 500, 500, 1000, 1000}; }

KeypointObservation observe(const BodyParams& p, const Intrinsics& K, double confidence = 1.0) {
  KeypointObservation obs;
  const auto J = joints<double>(p, model().body);
  for (int j = 0; j < kNumJoints; ++j) {
    obs.joints[static_cast<size_t>(j)].J = project<double>(J.col(j).eval(), K);
    obs.joints[static_cast<size_t>(j)].w = confidence;
  }
  return obs;
}
}  // namespace

TEST_CASE("init_params matches the fixed initialization") {
  const BodyParams p = init_params();
  CHECK(p.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(tau_denormalize<double>(p.tau).isApprox(Vec3d(0, 0, 10), 1e-15));
  CHECK(rot6d_decode<double>(p.phi).isApprox(Mat3d::Identity(), 1e-15));
  for (int j = 0; j < kNumPoseJoints; ++j)
    CHECK(rot6d_decode<double>(p.theta.segment<6>(6 * j).eval()).isApprox(Mat3d::Identity(), 1e-15));
}

TEST_CASE("mode flags and parsing") {
  CHECK(parse_mode("baseline") == EstimatorMode::Baseline);
  CHECK(parse_mode("multiview") == EstimatorMode::BaselineMultiview);
  CHECK(parse_mode("fullcam") == EstimatorMode::BaselineFullcam);
  CHECK(parse_mode("airpose") == EstimatorMode::AirPose);
  CHECK_THROWS_AS(parse_mode("hmr"), ConfigError);
  CHECK(!mode_exchanges(EstimatorMode::Baseline));
  CHECK(mode_exchanges(EstimatorMode::BaselineMultiview));
  CHECK(!mode_uses_crop(EstimatorMode::BaselineMultiview));
  CHECK(mode_uses_crop(EstimatorMode::AirPose));
  CHECK(parse_refiner("gradient") == RefinerKind::Gradient);
  CHECK(parse_refiner("oracle") == RefinerKind::Oracle);
  CHECK_THROWS_AS(parse_refiner("net"), ConfigError);
}

TEST_CASE("oracle refiner with alpha=1, sigma=0 returns ground truth") {
  Rng rng(211);
  BodyParams gt = airpose::testing::random_params(rng, 0.3, 0.2);
  gt.tau = Vec3d(0.4, -0.2, 8.0);

  RefinerConfig cfg;
  cfg.oracle_alpha = 1.0;
  cfg.oracle_noise_sigma = 0.0;
  OracleNoiseRefiner refiner(cfg, 7);
  refiner.set_ground_truth(gt);

  const KeypointObservation obs = observe(gt, make_k());
  const auto result = run_three_stages(0, obs, make_k(), {0, 0, 1}, EstimatorMode::AirPose, refiner,
                                       [&](const StageMessage& msg) {
                                         // partner echoes arbitrary junk; oracle must ignore it
                                         return std::make_pair(message_theta(msg), message_beta(msg));
                                       });
  CHECK((result.output.tau - gt.tau).norm() < 1e-12);
  CHECK((result.output.theta - gt.theta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((result.output.beta - gt.beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(result.outbound.size() == 2);
}

TEST_CASE("message count and float budget per mode") {
  RefinerConfig cfg;
  cfg.oracle_alpha = 1.0;
  OracleNoiseRefiner refiner(cfg, 3);
  BodyParams gt = init_params();
  gt.tau = Vec3d(0, 0, 8);
  refiner.set_ground_truth(gt);
  const KeypointObservation obs = observe(gt, make_k());

  auto run_mode = [&](EstimatorMode mode) {
    return run_three_stages(5, obs, make_k(), {0, 0, 1}, mode, refiner,
                            [&](const StageMessage& msg) {
                              return std::make_pair(message_theta(msg), message_beta(msg));
                            });
  };
  CHECK(run_mode(EstimatorMode::Baseline).outbound.empty());
  CHECK(run_mode(EstimatorMode::BaselineFullcam).outbound.empty());

  const auto mv = run_mode(EstimatorMode::BaselineMultiview);
  REQUIRE(mv.outbound.size() == 2);
  int floats = 0;
  for (const auto& msg : mv.outbound) {
    floats += static_cast<int>(msg.theta.size() + msg.beta.size());
    CHECK(encode_message(msg).size() == kMessageBytes);
    CHECK(msg.frame_id == 5);
  }
  CHECK(floats == 272);
  CHECK(mv.outbound[0].stage == 0);
  CHECK(mv.outbound[1].stage == 1);
}

TEST_CASE("gradient refiner: prior-only descent leaves tau, pulls theta toward identity") {
  Rng rng(223);
  RefinerConfig cfg;
  cfg.steps = 25;
  GradientRefiner refiner(model(), cfg);
  refiner.reset_frame();

  StageInput input;
  input.observation = KeypointObservation{};  // all confidences zero
  input.intrinsics = make_k();
  input.current = init_params();
  for (int j = 0; j < kNumPoseJoints; ++j)
    input.current.theta.segment<6>(6 * j) = airpose::testing::random_rot6d(rng);

  const double before = prior_encode<double>(input.current.theta, model().prior).norm();
  const BodyParams out = refiner.refine(input);
  const double after = prior_encode<double>(out.theta, model().prior).norm();

  CHECK((out.tau - input.current.tau).norm() == 0.0);
  CHECK((out.beta - input.current.beta).norm() == 0.0);
  CHECK(after < before);
}

TEST_CASE("gradient refiner decreases its objective at every accepted step") {
  Rng rng(227);
  RefinerConfig cfg;
  GradientRefiner refiner(model(), cfg);

  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    BodyParams truth = airpose::testing::random_params(rng, 0.2, 0.2);
    truth.tau = Vec3d(0.5 * rng.normal(), 0.5 * rng.normal(), 6.0 + 3.0 * rng.uniform());
    KeypointObservation obs = observe(truth, make_k(), 0.9);
    for (auto& kp : obs.joints) kp.J += Vec2d(2.0 * rng.normal(), 2.0 * rng.normal());

    StageInput input;
    input.observation = crop_relative_observation(obs, {0, 0, 1}, make_k());
    input.intrinsics = make_k();
    input.current = init_params();
    refiner.reset_frame();
    const BodyParams out = refiner.refine(input);
    const auto& trace = refiner.objective_trace();
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] < trace[i - 1]);
    CHECK(refiner.objective(input, out) == Catch::Approx(trace.back()));
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("frame conventions: fullcam output is full frame, baseline output crop frame") {
  // A single camera with an off-center crop; the same working state finalizes
  // differently per mode.
  const Intrinsics K = make_k();
  const CropParams P{0.3, -0.2, 1.7};
  RefinerConfig cfg;
  cfg.steps = 0;  // keep the initial state
  GradientRefiner refiner(model(), cfg);

  const KeypointObservation obs;  // unused at steps=0
  const auto base = run_three_stages(0, obs, K, P, EstimatorMode::Baseline, refiner, {});
  const auto full = run_three_stages(0, obs, K, P, EstimatorMode::BaselineFullcam, refiner, {});

  const Vec3d tau_state = tau_denormalize<double>(init_params().tau);
  CHECK(base.output.tau.isApprox(tau_state, 1e-14));
  CHECK(full.output.tau.isApprox(crop_to_full<double>(tau_state, P, K), 1e-14));
}

TEST_CASE("fullcam refiner recovers full-frame placement from crop-relative keypoints") {
  // Off-center subject: without P the centered-crop assumption misplaces tau;
  // with P the objective sees through crop_to_full and recovers it.
  Rng rng(229);
  const Intrinsics K = make_k();
  BodyParams truth;
  truth.tau = Vec3d(1.8, -1.1, 9.0);
  const KeypointObservation full = observe(truth, K);
  // crop described by its true parameters
  const auto J = joints<double>(truth, model().body);
  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2d uv = project<double>(J.col(j).eval(), K);
    min_x = std::min(min_x, uv.x());
    max_x = std::max(max_x, uv.x());
    min_y = std::min(min_y, uv.y());
    max_y = std::max(max_y, uv.y());
  }
  const BBox sq = squarify_bbox({min_x, min_y, max_x - min_x, max_y - min_y});
  const CropParams P = crop_params_from_bbox(sq.x0, sq.y0, sq.width, K);
  const KeypointObservation obs = crop_relative_observation(full, P, K);

  RefinerConfig cfg;
  cfg.steps = 60;
  GradientRefiner refiner(model(), cfg);

  StageInput input;
  input.observation = obs;
  input.intrinsics = K;
  input.crop = P;
  input.current = init_params();
  refiner.reset_frame();
  for (int stage = 0; stage < 3; ++stage) {
    input.stage_index = stage;
    input.current = refiner.refine(input);
  }
  const BodyParams out = refiner.finalize(input.current, input.crop, K);
  CHECK((out.tau - truth.tau).norm() < 0.05);

  // Baseline on the same observations: no P, so the placement lands near the
  // crop-center ray instead of the truth.
  GradientRefiner base(model(), cfg);
  StageInput bin = input;
  bin.crop.reset();
  bin.current = init_params();
  base.reset_frame();
  for (int stage = 0; stage < 3; ++stage) {
    bin.stage_index = stage;
    bin.current = base.refine(bin);
  }
  const BodyParams bout = base.finalize(bin.current, bin.crop, K);
  CHECK((bout.tau - truth.tau).norm() > 5.0 * (out.tau - truth.tau).norm());
}

TEST_CASE("two-view gradient refinement recovers ground-truth tau") {
  // Noiseless two-camera frame; AirPose-mode refinement run to convergence.
  SceneConfig scene;
  scene.frames = 1;
  scene.seed = 233;
  scene.beta_sigma = 0.0;
  scene.latent_sigma = 0.6;
  NoiseConfig noise;
  noise.keypoint_sigma_px = 0.0;
  noise.visible_conf_lo = noise.visible_conf_hi = 1.0;
  const auto dataset = generate_sequence(model(), scene, noise);

  RefinerConfig cfg;
  cfg.steps = 120;
  const auto estimates =
      estimate_frames(model(), dataset, EstimatorMode::AirPose, RefinerKind::Gradient, cfg, 1);
  REQUIRE(estimates.size() == 1);
  for (int c = 0; c < 2; ++c) {
    const double err = (estimates[0][static_cast<size_t>(c)].tau -
                        dataset[0].tau_gt[static_cast<size_t>(c)]).norm();
    CHECK(err < 1e-2);
  }
}

TEST_CASE("exchange timeout propagates") {
  RefinerConfig cfg;
  cfg.oracle_alpha = 1.0;
  OracleNoiseRefiner refiner(cfg, 3);
  refiner.set_ground_truth(init_params());
  const KeypointObservation obs;
  CHECK_THROWS_AS(run_three_stages(0, obs, make_k(), {0, 0, 1}, EstimatorMode::AirPose, refiner,
                                   [](const StageMessage&) -> std::pair<ThetaVec, ShapeVec> {
                                     throw ExchangeTimeout("partner gone");
                                   }),
                  ExchangeTimeout);
}

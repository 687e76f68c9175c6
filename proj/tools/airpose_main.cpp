#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "airpose/airpose.hpp"

namespace {

using nlohmann::json;

struct CliConfig {
  airpose::SceneConfig scene;
  airpose::NoiseConfig noise;
  airpose::SessionConfig session;
  airpose::OptimizerConfig optimizer;
  std::uint64_t model_seed = 2024;
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_config_file(const std::string& path, CliConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw airpose::ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw airpose::ConfigError(std::string("config parse error: ") + e.what());
  }
  maybe(j, "model_seed", cfg.model_seed);
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    maybe(s, "frames", cfg.scene.frames);
    maybe(s, "fps", cfg.scene.fps);
    maybe(s, "seed", cfg.scene.seed);
    maybe(s, "person_range_m", cfg.scene.person_range_m);
    maybe(s, "person_height_m", cfg.scene.person_height_m);
    maybe(s, "beta_sigma", cfg.scene.beta_sigma);
    maybe(s, "latent_sigma", cfg.scene.latent_sigma);
    maybe(s, "latent_correlation_s", cfg.scene.latent_correlation_s);
    if (s.contains("cameras")) {
      const auto& cams = s["cameras"];
      for (std::size_t c = 0; c < std::min<std::size_t>(2, cams.size()); ++c) {
        auto& cc = cfg.scene.cameras[c];
        std::string pattern;
        maybe(cams[c], "pattern", pattern);
        if (!pattern.empty()) cc.pattern = airpose::parse_motion_pattern(pattern);
        maybe(cams[c], "orbit_rate_deg_per_s", cc.orbit_rate_deg_per_s);
        maybe(cams[c], "distance_m", cc.distance_m);
        maybe(cams[c], "distance_spread_m", cc.distance_spread_m);
        maybe(cams[c], "pitch_deg", cc.pitch_deg);
        maybe(cams[c], "azimuth_deg", cc.azimuth_deg);
      }
    }
    if (s.contains("intrinsics")) {
      const auto& k = s["intrinsics"];
      maybe(k, "fx", cfg.scene.intrinsics.fx);
      maybe(k, "fy", cfg.scene.intrinsics.fy);
      maybe(k, "cx", cfg.scene.intrinsics.cx);
      maybe(k, "cy", cfg.scene.intrinsics.cy);
      maybe(k, "width", cfg.scene.intrinsics.width);
      maybe(k, "height", cfg.scene.intrinsics.height);
    }
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    maybe(n, "keypoint_sigma_px", cfg.noise.keypoint_sigma_px);
    if (n.contains("occlusion_prob")) {
      const auto& p = n["occlusion_prob"];
      for (std::size_t c = 0; c < std::min<std::size_t>(2, p.size()); ++c)
        cfg.noise.occlusion_prob[c] = p[c].get<double>();
    }
    maybe(n, "visible_conf_lo", cfg.noise.visible_conf_lo);
    maybe(n, "visible_conf_hi", cfg.noise.visible_conf_hi);
    maybe(n, "occluded_conf_lo", cfg.noise.occluded_conf_lo);
    maybe(n, "occluded_conf_hi", cfg.noise.occluded_conf_hi);
    maybe(n, "occluded_extra_sigma_px", cfg.noise.occluded_extra_sigma_px);
    maybe(n, "second_detector", cfg.noise.second_detector);
    maybe(n, "second_detector_sigma_px", cfg.noise.second_detector_sigma_px);
    maybe(n, "second_detector_outlier_prob", cfg.noise.second_detector_outlier_prob);
    maybe(n, "second_detector_outlier_px", cfg.noise.second_detector_outlier_px);
    maybe(n, "gate_threshold_px", cfg.noise.gate_threshold_px);
    maybe(n, "crop_pad_fraction", cfg.noise.crop_pad_fraction);
    maybe(n, "crop_jitter_px", cfg.noise.crop_jitter_px);
  }
  if (j.contains("timing")) {
    auto& t = cfg.session.timing;
    const auto& tj = j["timing"];
    maybe(tj, "acquisition_ms", t.acquisition_ms);
    maybe(tj, "stage1_ms", t.stage1_ms);
    maybe(tj, "later_stage_ms", t.later_stage_ms);
    maybe(tj, "comm_ms", t.comm_ms);
    maybe(tj, "window_ms", t.window_ms);
    maybe(tj, "camera_fps", t.camera_fps);
    maybe(tj, "clock_offset_ms", t.clock_offset_ms);
    if (tj.contains("jitter")) {
      const auto& jj = tj["jitter"];
      if (jj.is_string() && jj.get<std::string>() == "calibrated") {
        t.jitter = airpose::calibrated_jitter();
      } else {
        maybe(jj, "acquisition_mean_ms", t.jitter.acquisition_mean_ms);
        maybe(jj, "stage_mean_ms", t.jitter.stage_mean_ms);
        maybe(jj, "comm_mean_ms", t.jitter.comm_mean_ms);
      }
    }
  }
  if (j.contains("refiner")) {
    auto& r = cfg.session.refiner_config;
    const auto& rj = j["refiner"];
    maybe(rj, "steps", r.steps);
    maybe(rj, "initial_step", r.initial_step);
    maybe(rj, "w_j2d", r.w_j2d);
    maybe(rj, "w_vposer", r.w_vposer);
    maybe(rj, "w_partner_theta", r.w_partner_theta);
    maybe(rj, "w_partner_beta", r.w_partner_beta);
    maybe(rj, "sigma_px", r.sigma_px);
    maybe(rj, "oracle_alpha", r.oracle_alpha);
    maybe(rj, "oracle_noise_sigma", r.oracle_noise_sigma);
  }
  if (j.contains("optimizer")) {
    auto& o = cfg.optimizer;
    const auto& oj = j["optimizer"];
    maybe(oj, "max_iterations", o.max_iterations);
    maybe(oj, "initial_step", o.initial_step);
    maybe(oj, "tolerance", o.tolerance);
    maybe(oj, "sigma", o.sigma);
    maybe(oj, "conf_threshold", o.conf_threshold);
  }
}

std::filesystem::path ensure_out_dir(const std::string& out) {
  std::filesystem::path dir(out.empty() ? "." : out);
  std::filesystem::create_directories(dir);
  return dir;
}

airpose::Model load_or_default_model(const std::string& model_path, std::uint64_t model_seed) {
  if (!model_path.empty()) return airpose::load_model(model_path);
  return airpose::make_default_model(model_seed);
}

airpose::SequenceObservations observations_for(const std::vector<airpose::FrameRecord>& dataset,
                                               const std::vector<std::int64_t>& frame_ids) {
  std::unordered_map<std::int64_t, std::size_t> by_id;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].frame_id] = i;
  airpose::SequenceObservations obs;
  for (std::int64_t id : frame_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end())
      throw airpose::DatasetError("estimates reference frame_id " + std::to_string(id) +
                                  " absent from the dataset");
    const auto& rec = dataset[it->second];
    obs.keypoints.push_back({rec.cameras[0].keypoints, rec.cameras[1].keypoints});
    obs.cameras.push_back({airpose::CameraFrame{rec.cameras[0].intrinsics, {0, 0, 1}},
                           airpose::CameraFrame{rec.cameras[1].intrinsics, {0, 0, 1}}});
  }
  return obs;
}

int run(int argc, char** argv) {
  CLI::App app{"Distributed two-camera human pose/shape estimation simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  CliConfig cfg;
  std::string config_path, out_dir, model_path;
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "Generate a synthetic two-camera dataset");
  int gen_frames = 100;
  double gen_fps = 1000.0 / 240.0;
  double occlusion0 = 0.0, occlusion1 = 0.0, sigma_px = 2.0;
  generate->add_option("--frames", gen_frames, "Number of frames")->capture_default_str();
  generate->add_option("--fps", gen_fps, "Frame rate")->capture_default_str();
  generate->add_option("--keypoint-sigma", sigma_px, "Keypoint noise (px)")->capture_default_str();
  generate->add_option("--occlusion-cam0", occlusion0, "Per-joint occlusion probability, camera 0");
  generate->add_option("--occlusion-cam1", occlusion1, "Per-joint occlusion probability, camera 1");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a timed two-agent estimation session");
  std::string sim_dataset, mode_str = "airpose", refiner_str = "gradient";
  bool pipelined = false, threaded = false, jitter_on = false;
  simulate->add_option("--dataset", sim_dataset, "Dataset JSONL")->required();
  simulate->add_option("--mode", mode_str, "baseline|multiview|fullcam|airpose")->capture_default_str();
  simulate->add_option("--refiner", refiner_str, "gradient|oracle")->capture_default_str();
  simulate->add_flag("--pipelined", pipelined, "Consume the partner's previous-frame messages");
  simulate->add_flag("--threaded", threaded, "Drive the agents with two real threads");
  simulate->add_flag("--jitter", jitter_on, "Enable the calibrated timing jitter model");
  simulate->add_option("--model", model_path, "Model bundle JSON (default: built-in)");

  // refine
  auto* refine_cmd = app.add_subcommand("refine", "Offline whole-sequence refinement");
  std::string ref_dataset, ref_estimates;
  refine_cmd->add_option("--dataset", ref_dataset, "Dataset JSONL")->required();
  refine_cmd->add_option("--estimates", ref_estimates, "Session estimates JSONL")->required();
  refine_cmd->add_option("--model", model_path, "Model bundle JSON (default: built-in)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate estimates against ground truth");
  std::string eval_dataset, eval_estimates, eval_refined;
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset JSONL")->required();
  eval_cmd->add_option("--estimates", eval_estimates, "Session estimates JSONL");
  eval_cmd->add_option("--refined", eval_refined, "Refined sequence JSONL");
  eval_cmd->add_option("--model", model_path, "Model bundle JSON (default: built-in)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run the four-mode ablation on one dataset");
  std::string abl_dataset, abl_refiner = "gradient";
  ablate->add_option("--dataset", abl_dataset, "Dataset JSONL")->required();
  ablate->add_option("--refiner", abl_refiner, "gradient|oracle")->capture_default_str();
  ablate->add_option("--model", model_path, "Model bundle JSON (default: built-in)");

  // export-csv
  auto* export_csv = app.add_subcommand("export-csv", "Export per-camera trajectories as CSV");
  std::string exp_estimates;
  export_csv->add_option("--estimates", exp_estimates, "Session estimates JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (!config_path.empty()) apply_config_file(config_path, cfg);
  const auto dir = ensure_out_dir(out_dir);

  if (*generate) {
    if (!generate->get_option("--frames")->empty() || cfg.scene.frames == 0)
      cfg.scene.frames = gen_frames;
    if (!generate->get_option("--fps")->empty()) cfg.scene.fps = gen_fps;
    if (!generate->get_option("--keypoint-sigma")->empty()) cfg.noise.keypoint_sigma_px = sigma_px;
    if (!generate->get_option("--occlusion-cam0")->empty()) cfg.noise.occlusion_prob[0] = occlusion0;
    if (!generate->get_option("--occlusion-cam1")->empty()) cfg.noise.occlusion_prob[1] = occlusion1;
    cfg.scene.seed = seed;
    const airpose::Model model = airpose::make_default_model(cfg.model_seed);
    const auto dataset = airpose::generate_sequence(model, cfg.scene, cfg.noise);
    airpose::save_dataset(dataset, (dir / "dataset.jsonl").string());
    airpose::save_model(model, (dir / "model.json").string());
    std::cout << "wrote " << dataset.size() << " frames to " << (dir / "dataset.jsonl").string()
              << "\n";
    return 0;
  }

  if (*simulate) {
    const airpose::Model model = load_or_default_model(model_path, cfg.model_seed);
    const auto dataset = airpose::load_dataset(sim_dataset);
    cfg.session.mode = airpose::parse_mode(mode_str);
    cfg.session.refiner = airpose::parse_refiner(refiner_str);
    cfg.session.pipelined = pipelined;
    cfg.session.execution =
        threaded ? airpose::ExecutionPolicy::Threads : airpose::ExecutionPolicy::EventLoop;
    cfg.session.seed = seed;
    if (jitter_on) cfg.session.timing.jitter = airpose::calibrated_jitter();
    const airpose::SessionResult result = airpose::run_session(model, dataset, cfg.session);
    airpose::save_estimates(result, (dir / "estimates.jsonl").string());
    airpose::save_report(result.report, (dir / "report.json").string());
    airpose::save_latency_trace_csv(result.report, (dir / "trace.csv").string());
    std::cout << "completed " << result.report.completed << "/" << result.report.matched
              << " frames, effective fps " << result.report.effective_fps << "\n";
    return 0;
  }

  if (*refine_cmd) {
    const airpose::Model model = load_or_default_model(model_path, cfg.model_seed);
    const auto dataset = airpose::load_dataset(ref_dataset);
    const airpose::PairedEstimates paired = airpose::load_estimates(ref_estimates);

    std::vector<std::array<airpose::BodyParams, 2>> frames;
    std::vector<std::int64_t> frame_ids;
    for (std::size_t i = 0; i < paired.params.size(); ++i) {
      if (!paired.completed[i]) continue;  // dropped frames carry no estimate
      frames.push_back(paired.params[i]);
      frame_ids.push_back(paired.frame_ids[i]);
    }
    if (frames.size() < 2)
      throw airpose::SequenceTooShort("refine: fewer than 2 completed frames in the estimates");

    const airpose::SequenceObservations obs = observations_for(dataset, frame_ids);
    const airpose::SequenceEstimate init = airpose::init_from_airpose(frames, model);
    const airpose::RefineResult result = airpose::refine(model, init, obs, cfg.optimizer);

    airpose::save_refined(result.estimate, (dir / "refined.jsonl").string());
    airpose::save_loss_trace_csv(result.loss_trace, (dir / "loss_trace.csv").string());
    airpose::save_relative_trajectory_csv(airpose::relative_camera_trajectory(result.estimate),
                                          (dir / "relative_trajectory.csv").string());
    std::cout << "refined " << frames.size() << " frames in " << result.iterations
              << " iterations; loss " << result.loss_trace.front() << " -> "
              << result.loss_trace.back() << "\n";
    return 0;
  }

  if (*eval_cmd) {
    const airpose::Model model = load_or_default_model(model_path, cfg.model_seed);
    const auto dataset = airpose::load_dataset(eval_dataset);
    std::unordered_map<std::int64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].frame_id] = i;

    std::vector<std::array<airpose::BodyParams, 2>> estimates;
    std::vector<airpose::FrameRecord> gt;
    if (!eval_refined.empty()) {
      const airpose::SequenceEstimate seq = airpose::load_refined(eval_refined);
      if (eval_estimates.empty())
        throw airpose::ConfigError("eval --refined also needs --estimates for frame ids");
      const airpose::PairedEstimates paired = airpose::load_estimates(eval_estimates);
      std::vector<std::int64_t> ids;
      for (std::size_t i = 0; i < paired.params.size(); ++i)
        if (paired.completed[i]) ids.push_back(paired.frame_ids[i]);
      if (static_cast<int>(ids.size()) != seq.frames())
        throw airpose::ShapeMismatch("refined sequence length does not match completed estimates");
      for (int t = 0; t < seq.frames(); ++t) {
        std::array<airpose::BodyParams, 2> pair;
        for (int c = 0; c < 2; ++c) {
          pair[static_cast<size_t>(c)].tau = seq.tau[static_cast<size_t>(t)][static_cast<size_t>(c)];
          pair[static_cast<size_t>(c)].phi = seq.phi[static_cast<size_t>(t)][static_cast<size_t>(c)];
          pair[static_cast<size_t>(c)].theta =
              airpose::prior_decode<double>(seq.v[static_cast<size_t>(t)], model.prior);
          pair[static_cast<size_t>(c)].beta = seq.beta;
        }
        estimates.push_back(pair);
        gt.push_back(dataset.at(by_id.at(ids[static_cast<size_t>(t)])));
      }
    } else {
      if (eval_estimates.empty())
        throw airpose::ConfigError("eval needs --estimates or --refined");
      const airpose::PairedEstimates paired = airpose::load_estimates(eval_estimates);
      for (std::size_t i = 0; i < paired.params.size(); ++i) {
        if (!paired.completed[i]) continue;
        estimates.push_back(paired.params[i]);
        gt.push_back(dataset.at(by_id.at(paired.frame_ids[i])));
      }
    }
    const airpose::EvalReport rep = airpose::evaluate(model, estimates, gt);
    json j;
    j["mpe_m"] = rep.mpe_m;
    j["mpjpe_m"] = rep.mpjpe_m;
    j["frames_evaluated"] = rep.frames_evaluated;
    j["seed"] = seed;
    j["mpe_series"] = rep.mpe_series;
    j["mpjpe_series"] = rep.mpjpe_series;
    std::ofstream out(dir / "eval.json");
    out << j.dump(2) << "\n";
    std::cout << "MPE " << rep.mpe_m << " m, MPJPE " << rep.mpjpe_m << " m over "
              << rep.frames_evaluated << " frames\n";
    return 0;
  }

  if (*ablate) {
    const airpose::Model model = load_or_default_model(model_path, cfg.model_seed);
    const auto dataset = airpose::load_dataset(abl_dataset);
    const airpose::AblationResult result = airpose::run_ablation(
        model, dataset, airpose::parse_refiner(abl_refiner), cfg.session.refiner_config, seed);
    json j = json::array();
    std::ofstream csv(dir / "ablation.csv");
    csv << "mode,mpe_m,mpjpe_m\n";
    for (const auto& entry : result.entries) {
      j.push_back({{"mode", entry.report.mode},
                   {"mpe_m", entry.report.mpe_m},
                   {"mpjpe_m", entry.report.mpjpe_m},
                   {"input_hash", entry.input_hash}});
      csv << entry.report.mode << "," << entry.report.mpe_m << "," << entry.report.mpjpe_m << "\n";
      std::cout << entry.report.mode << ": MPE " << entry.report.mpe_m << " m, MPJPE "
                << entry.report.mpjpe_m << " m\n";
    }
    std::ofstream out(dir / "ablation.json");
    out << j.dump(2) << "\n";
    return 0;
  }

  if (*export_csv) {
    const airpose::PairedEstimates paired = airpose::load_estimates(exp_estimates);
    airpose::save_trajectories_csv(paired, (dir / "trajectories.csv").string());
    std::cout << "wrote " << paired.params.size() << " rows to "
              << (dir / "trajectories.csv").string() << "\n";
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const airpose::DegenerateRotation& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const airpose::NotARotation& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const airpose::BehindCamera& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const airpose::NonFiniteObjective& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const airpose::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "airpose/airpose_plus.hpp"
#include "airpose/session.hpp"
#include "airpose/synthgen.hpp"

namespace airpose {

namespace io_detail {

template <typename Derived>
nlohmann::json vec_json(const Eigen::MatrixBase<Derived>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

template <typename Vec>
void vec_load(const nlohmann::json& a, Vec& v) {
  if (static_cast<int>(a.size()) != v.size())
    throw DatasetError("vector length mismatch in JSON document");
  for (int i = 0; i < v.size(); ++i) v(i) = a[static_cast<size_t>(i)].get<double>();
}

}  // namespace io_detail

inline nlohmann::json body_params_to_json(const BodyParams& p) {
  return {{"tau", io_detail::vec_json(p.tau)},
          {"phi", io_detail::vec_json(p.phi)},
          {"theta", io_detail::vec_json(p.theta)},
          {"beta", io_detail::vec_json(p.beta)}};
}

inline BodyParams body_params_from_json(const nlohmann::json& j) {
  BodyParams p;
  io_detail::vec_load(j.at("tau"), p.tau);
  io_detail::vec_load(j.at("phi"), p.phi);
  io_detail::vec_load(j.at("theta"), p.theta);
  io_detail::vec_load(j.at("beta"), p.beta);
  return p;
}

inline nlohmann::json frame_to_json(const FrameRecord& rec) {
  nlohmann::json j;
  j["v"] = 1;
  j["frame_id"] = rec.frame_id;
  j["shutter_timestamp"] = rec.shutter_timestamp_ns;
  nlohmann::json cams = nlohmann::json::array();
  for (const auto& cam : rec.cameras) {
    nlohmann::json c;
    c["intrinsics"] = {{"fx", cam.intrinsics.fx}, {"fy", cam.intrinsics.fy},
                       {"cx", cam.intrinsics.cx}, {"cy", cam.intrinsics.cy},
                       {"width", cam.intrinsics.width}, {"height", cam.intrinsics.height}};
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) rot.push_back(cam.pose.rotation(r, cc));
    c["pose"] = {{"rotation", rot}, {"translation", io_detail::vec_json(cam.pose.translation)}};
    c["crop"] = {{"bx", cam.crop.bx}, {"by", cam.crop.by}, {"s", cam.crop.s}};
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& kp : cam.keypoints.joints)
      kps.push_back({{"J", {kp.J.x(), kp.J.y()}}, {"w", kp.w}});
    c["keypoints"] = kps;
    cams.push_back(c);
  }
  j["cameras"] = cams;
  nlohmann::json gt;
  gt["body_world"] = body_params_to_json(rec.gt_world);
  nlohmann::json per_cam = nlohmann::json::array();
  for (int c = 0; c < 2; ++c)
    per_cam.push_back({{"tau_gt", io_detail::vec_json(rec.tau_gt[static_cast<size_t>(c)])},
                       {"phi_gt", io_detail::vec_json(rec.phi_gt[static_cast<size_t>(c)])}});
  gt["per_camera"] = per_cam;
  j["gt"] = gt;
  return j;
}

inline FrameRecord frame_from_json(const nlohmann::json& j) {
  FrameRecord rec;
  rec.frame_id = j.at("frame_id").get<std::int64_t>();
  rec.shutter_timestamp_ns = j.at("shutter_timestamp").get<std::int64_t>();
  const auto& cams = j.at("cameras");
  if (cams.size() != 2) throw DatasetError("frame_from_json: expected 2 cameras");
  for (int c = 0; c < 2; ++c) {
    auto& cam = rec.cameras[static_cast<size_t>(c)];
    const auto& cj = cams[static_cast<size_t>(c)];
    const auto& K = cj.at("intrinsics");
    cam.intrinsics = {K.at("fx").get<double>(),   K.at("fy").get<double>(),
                      K.at("cx").get<double>(),   K.at("cy").get<double>(),
                      K.at("width").get<int>(),   K.at("height").get<int>()};
    const auto& rot = cj.at("pose").at("rotation");
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) cam.pose.rotation(r, cc) = rot[static_cast<size_t>(3 * r + cc)].get<double>();
    io_detail::vec_load(cj.at("pose").at("translation"), cam.pose.translation);
    cam.crop = {cj.at("crop").at("bx").get<double>(), cj.at("crop").at("by").get<double>(),
                cj.at("crop").at("s").get<double>()};
    const auto& kps = cj.at("keypoints");
    if (kps.size() != kNumJoints) throw DatasetError("frame_from_json: expected 22 keypoints");
    for (int k = 0; k < kNumJoints; ++k) {
      cam.keypoints.joints[static_cast<size_t>(k)].J =
          Vec2d(kps[static_cast<size_t>(k)].at("J")[0].get<double>(),
                kps[static_cast<size_t>(k)].at("J")[1].get<double>());
      cam.keypoints.joints[static_cast<size_t>(k)].w = kps[static_cast<size_t>(k)].at("w").get<double>();
    }
  }
  rec.gt_world = body_params_from_json(j.at("gt").at("body_world"));
  for (int c = 0; c < 2; ++c) {
    io_detail::vec_load(j.at("gt").at("per_camera")[static_cast<size_t>(c)].at("tau_gt"),
                        rec.tau_gt[static_cast<size_t>(c)]);
    io_detail::vec_load(j.at("gt").at("per_camera")[static_cast<size_t>(c)].at("phi_gt"),
                        rec.phi_gt[static_cast<size_t>(c)]);
  }
  return rec;
}

inline void save_dataset(const std::vector<FrameRecord>& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_dataset: cannot open " + path);
  for (const auto& rec : dataset) out << frame_to_json(rec).dump() << "\n";
}

inline std::vector<FrameRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("load_dataset: cannot open " + path);
  std::vector<FrameRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(frame_from_json(nlohmann::json::parse(line)));
  }
  if (out.empty()) throw DatasetError("load_dataset: no frames in " + path);
  return out;
}

// Session estimates: one JSON line per matched frame with both agents'
// finalized parameters.
inline void save_estimates(const SessionResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_estimates: cannot open " + path);
  const auto& a0 = result.estimates[0];
  const auto& a1 = result.estimates[1];
  for (std::size_t i = 0; i < a0.size(); ++i) {
    nlohmann::json j;
    j["frame_id"] = a0[i].frame_id;
    j["shutter_timestamp"] = a0[i].shutter_timestamp_ns;
    j["completed"] = a0[i].completed;
    j["cameras"] = {body_params_to_json(a0[i].params), body_params_to_json(a1[i].params)};
    out << j.dump() << "\n";
  }
}

struct PairedEstimates {
  std::vector<std::int64_t> frame_ids;
  std::vector<std::int64_t> timestamps_ns;
  std::vector<bool> completed;
  std::vector<std::array<BodyParams, 2>> params;
};

inline PairedEstimates load_estimates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("load_estimates: cannot open " + path);
  PairedEstimates out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    out.frame_ids.push_back(j.at("frame_id").get<std::int64_t>());
    out.timestamps_ns.push_back(j.at("shutter_timestamp").get<std::int64_t>());
    out.completed.push_back(j.at("completed").get<bool>());
    out.params.push_back({body_params_from_json(j.at("cameras")[0]),
                          body_params_from_json(j.at("cameras")[1])});
  }
  if (out.params.empty()) throw DatasetError("load_estimates: no rows in " + path);
  return out;
}

inline nlohmann::json report_to_json(const SessionReport& rep) {
  nlohmann::json j;
  j["matched"] = rep.matched;
  j["completed"] = rep.completed;
  j["dropped"] = rep.dropped;
  j["unmatched"] = rep.unmatched;
  j["virtual_seconds"] = rep.virtual_seconds;
  j["effective_fps"] = rep.effective_fps;
  j["drop_rate"] = rep.drop_rate;
  j["messages_sent"] = rep.messages_sent;
  j["bytes_sent"] = rep.bytes_sent;
  j["floats_exchanged"] = rep.floats_exchanged;
  j["cross_agent_reads"] = rep.cross_agent_reads;
  return j;
}

inline void save_report(const SessionReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_report: cannot open " + path);
  out << report_to_json(rep).dump(2) << "\n";
}

inline void save_latency_trace_csv(const SessionReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_latency_trace_csv: cannot open " + path);
  out << "frame_id,completed";
  for (int a = 0; a < 2; ++a)
    out << ",a" << a << "_acquisition,a" << a << "_stage1,a" << a << "_comm1,a" << a << "_stage2,a"
        << a << "_comm2,a" << a << "_stage3,a" << a << "_total";
  out << "\n";
  for (const auto& row : rep.trace) {
    out << row.frame_id << "," << (row.completed ? 1 : 0);
    for (const auto& t : row.agents)
      out << "," << t.acquisition << "," << t.stage1 << "," << t.comm1 << "," << t.stage2 << ","
          << t.comm2 << "," << t.stage3 << "," << t.total;
    out << "\n";
  }
}

// Refined sequence: header line carrying the shared shape, then one line per
// frame with the shared latent pose and per-camera root pose/translation.
inline void save_refined(const SequenceEstimate& seq, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_refined: cannot open " + path);
  out << nlohmann::json{{"schema", "airpose-refined"}, {"beta", io_detail::vec_json(seq.beta)}}.dump()
      << "\n";
  for (int t = 0; t < seq.frames(); ++t) {
    nlohmann::json j;
    j["frame"] = t;
    j["v"] = io_detail::vec_json(seq.v[static_cast<size_t>(t)]);
    j["cameras"] = {{{"phi", io_detail::vec_json(seq.phi[static_cast<size_t>(t)][0])},
                     {"tau", io_detail::vec_json(seq.tau[static_cast<size_t>(t)][0])}},
                    {{"phi", io_detail::vec_json(seq.phi[static_cast<size_t>(t)][1])},
                     {"tau", io_detail::vec_json(seq.tau[static_cast<size_t>(t)][1])}}};
    out << j.dump() << "\n";
  }
}

inline SequenceEstimate load_refined(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("load_refined: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("load_refined: empty file");
  const nlohmann::json header = nlohmann::json::parse(line);
  if (!header.contains("schema") || header["schema"] != "airpose-refined")
    throw DatasetError("load_refined: not an airpose-refined document");
  SequenceEstimate seq;
  io_detail::vec_load(header.at("beta"), seq.beta);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    LatentVec v;
    io_detail::vec_load(j.at("v"), v);
    seq.v.push_back(v);
    std::array<Vec6d, 2> phi;
    std::array<Vec3d, 2> tau;
    for (int c = 0; c < 2; ++c) {
      io_detail::vec_load(j.at("cameras")[static_cast<size_t>(c)].at("phi"), phi[static_cast<size_t>(c)]);
      io_detail::vec_load(j.at("cameras")[static_cast<size_t>(c)].at("tau"), tau[static_cast<size_t>(c)]);
    }
    seq.phi.push_back(phi);
    seq.tau.push_back(tau);
  }
  return seq;
}

inline void save_loss_trace_csv(const std::vector<double>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_loss_trace_csv: cannot open " + path);
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << "," << trace[i] << "\n";
}

inline void save_relative_trajectory_csv(const std::vector<RelativePose>& poses,
                                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_relative_trajectory_csv: cannot open " + path);
  out << "t,x,y,z,qw,qx,qy,qz\n";
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const Eigen::Quaterniond q(poses[t].rotation);
    out << t << "," << poses[t].translation.x() << "," << poses[t].translation.y() << ","
        << poses[t].translation.z() << "," << q.w() << "," << q.x() << "," << q.y() << "," << q.z()
        << "\n";
  }
}

// Per-frame per-camera estimated root translation, for trajectory plots.
inline void save_trajectories_csv(const PairedEstimates& est, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_trajectories_csv: cannot open " + path);
  out << "frame_id,time_s,completed,c0_x,c0_y,c0_z,c1_x,c1_y,c1_z\n";
  for (std::size_t i = 0; i < est.params.size(); ++i) {
    out << est.frame_ids[i] << "," << est.timestamps_ns[i] / 1e9 << "," << (est.completed[i] ? 1 : 0);
    for (int c = 0; c < 2; ++c) {
      const Vec3d& tau = est.params[i][static_cast<size_t>(c)].tau;
      out << "," << tau.x() << "," << tau.y() << "," << tau.z();
    }
    out << "\n";
  }
}

}  // namespace airpose

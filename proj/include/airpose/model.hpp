#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "airpose/body_model.hpp"
#include "airpose/pose_prior.hpp"

namespace airpose {

// Template geometry + prior basis, bundled so every implementation can share
// bit-identical numbers through one versioned JSON document.
struct Model {
  BodyTemplate body;
  PriorBasis prior;
};

inline Model make_default_model(std::uint64_t seed = 2024) {
  return {make_default_template(seed), make_default_prior(seed)};
}

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json j;
  j["schema"] = "airpose-model";
  j["version"] = m.body.version;
  j["seed"] = m.body.seed;

  nlohmann::json body;
  body["parent"] = m.body.parent;
  auto mat_cols = [](const auto& mat) {
    nlohmann::json arr = nlohmann::json::array();
    for (int c = 0; c < mat.cols(); ++c) {
      nlohmann::json col = nlohmann::json::array();
      for (int r = 0; r < mat.rows(); ++r) col.push_back(mat(r, c));
      arr.push_back(col);
    }
    return arr;
  };
  body["rest_joints"] = mat_cols(m.body.rest_joints);
  body["rest_vertices"] = mat_cols(m.body.rest_vertices);
  body["vertex_joint"] = m.body.vertex_joint;
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& b : m.body.joint_shape_basis) jb.push_back(mat_cols(b));
  body["joint_shape_basis"] = jb;
  nlohmann::json vb = nlohmann::json::array();
  for (const auto& b : m.body.vertex_shape_basis) vb.push_back(mat_cols(b));
  body["vertex_shape_basis"] = vb;
  j["body"] = body;

  nlohmann::json prior;
  prior["seed"] = m.prior.seed;
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < kThetaDim; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < kLatentDim; ++c) row.push_back(m.prior.D(r, c));
    rows.push_back(row);
  }
  prior["D"] = rows;
  j["prior"] = prior;
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  if (!j.contains("schema") || j["schema"] != "airpose-model")
    throw DatasetError("model_from_json: not an airpose-model document");
  Model m;
  m.body.version = j.at("version").get<int>();
  m.body.seed = j.at("seed").get<std::uint64_t>();
  const auto& body = j.at("body");
  m.body.parent = body.at("parent").get<std::array<int, kNumJoints>>();
  auto load_cols = [](const nlohmann::json& arr, auto& mat) {
    if (static_cast<int>(arr.size()) != mat.cols())
      throw DatasetError("model_from_json: column count mismatch");
    for (int c = 0; c < mat.cols(); ++c)
      for (int r = 0; r < mat.rows(); ++r) mat(r, c) = arr[static_cast<size_t>(c)][static_cast<size_t>(r)].get<double>();
  };
  load_cols(body.at("rest_joints"), m.body.rest_joints);
  load_cols(body.at("rest_vertices"), m.body.rest_vertices);
  m.body.vertex_joint = body.at("vertex_joint").get<std::array<int, kNumVertices>>();
  for (int i = 0; i < kNumJoints; ++i)
    load_cols(body.at("joint_shape_basis")[static_cast<size_t>(i)], m.body.joint_shape_basis[static_cast<size_t>(i)]);
  for (int i = 0; i < kNumVertices; ++i)
    load_cols(body.at("vertex_shape_basis")[static_cast<size_t>(i)], m.body.vertex_shape_basis[static_cast<size_t>(i)]);
  const auto& prior = j.at("prior");
  m.prior.seed = prior.at("seed").get<std::uint64_t>();
  for (int r = 0; r < kThetaDim; ++r)
    for (int c = 0; c < kLatentDim; ++c) m.prior.D(r, c) = prior.at("D")[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
  return m;
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("save_model: cannot open " + path);
  out << model_to_json(m).dump(2) << "\n";
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("load_model: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace airpose

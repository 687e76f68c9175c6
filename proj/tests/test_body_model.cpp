#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "airpose/body_model.hpp"
#include "airpose/model.hpp"
#include "helpers.hpp"

using namespace airpose;

namespace {
const BodyTemplate& tmpl() {
  static const BodyTemplate t = make_default_template();
  return t;
}
}  // namespace

TEST_CASE("template tree is acyclic with a single root") {
  const auto& t = tmpl();
  CHECK(t.parent[0] == -1);
  for (int j = 1; j < kNumJoints; ++j) {
    CHECK(t.parent[static_cast<size_t>(j)] >= 0);
    CHECK(t.parent[static_cast<size_t>(j)] < j);  // topological order
  }
  for (int v = 0; v < kNumVertices; ++v) {
    CHECK(t.vertex_joint[static_cast<size_t>(v)] >= 0);
    CHECK(t.vertex_joint[static_cast<size_t>(v)] < kNumJoints);
  }
}

TEST_CASE("template construction is deterministic") {
  const BodyTemplate a = make_default_template(99);
  const BodyTemplate b = make_default_template(99);
  CHECK(a.rest_joints == b.rest_joints);
  CHECK(a.rest_vertices == b.rest_vertices);
  for (int j = 0; j < kNumJoints; ++j)
    CHECK(a.joint_shape_basis[static_cast<size_t>(j)] == b.joint_shape_basis[static_cast<size_t>(j)]);
}

TEST_CASE("rest params reproduce the template") {
  BodyParams p;  // identity pose, zero shape, zero translation
  const auto J = joints<double>(p, tmpl());
  CHECK((J - tmpl().rest_joints).cwiseAbs().maxCoeff() < 1e-14);
  const auto V = vertices<double>(p, tmpl());
  CHECK((V - tmpl().rest_vertices).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("global translation shifts every joint and vertex") {
  BodyParams p;
  p.tau = Vec3d(1, 2, 3);
  const auto J = joints<double>(p, tmpl());
  for (int j = 0; j < kNumJoints; ++j)
    CHECK((J.col(j) - tmpl().rest_joints.col(j) - Vec3d(1, 2, 3)).norm() < 1e-14);
  const auto V = vertices<double>(p, tmpl());
  for (int v = 0; v < kNumVertices; ++v)
    CHECK((V.col(v) - tmpl().rest_vertices.col(v) - Vec3d(1, 2, 3)).norm() < 1e-14);
}

TEST_CASE("root rotation rotates the rest template rigidly") {
  Mat3d rz90;
  rz90 << 0, -1, 0,
          1, 0, 0,
          0, 0, 1;
  BodyParams p;
  p.phi = rot6d_encode(rz90);
  const auto J = joints<double>(p, tmpl());
  for (int j = 0; j < kNumJoints; ++j)
    CHECK((J.col(j) - rz90 * tmpl().rest_joints.col(j)).norm() < 1e-13);
}

TEST_CASE("joints and vertices are equivariant under rigid transforms") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    BodyParams p = testing::random_params(rng);
    p.tau.setZero();
    p.phi = identity_rot6d();
    const auto J0 = joints<double>(p, tmpl());
    const auto V0 = vertices<double>(p, tmpl());

    const Mat3d R = testing::random_rotation(rng);
    const Vec3d t(rng.normal(), rng.normal(), rng.normal());
    BodyParams q = p;
    q.tau = t;
    q.phi = rot6d_encode(R);
    const auto J1 = joints<double>(q, tmpl());
    const auto V1 = vertices<double>(q, tmpl());
    for (int j = 0; j < kNumJoints; ++j)
      CHECK((J1.col(j) - (R * J0.col(j) + t)).norm() < 1e-12);
    for (int v = 0; v < kNumVertices; ++v)
      CHECK((V1.col(v) - (R * V0.col(v) + t)).norm() < 1e-12);
  }
}

TEST_CASE("shape dependence is linear") {
  Rng rng(43);
  ShapeVec b1, b2;
  for (int k = 0; k < kShapeDim; ++k) {
    b1[k] = rng.normal();
    b2[k] = rng.normal();
  }
  BodyParams p;  // rest pose
  auto at = [&](const ShapeVec& b) {
    BodyParams q = p;
    q.beta = b;
    return joints<double>(q, tmpl());
  };
  const Eigen::Matrix<double, 3, kNumJoints> sum = at(b1 + b2);
  const Eigen::Matrix<double, 3, kNumJoints> lhs = sum - at(b1);
  const Eigen::Matrix<double, 3, kNumJoints> rhs = at(b2) - at(ShapeVec::Zero());
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("vertices keep their rest distance to the attached joint") {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const BodyParams p = testing::random_params(rng);
    const auto J = joints<double>(p, tmpl());
    const auto V = vertices<double>(p, tmpl());
    const auto shaped_j = shaped_joints<double>(p.beta, tmpl());
    for (int v = 0; v < kNumVertices; ++v) {
      const int j = tmpl().vertex_joint[static_cast<size_t>(v)];
      Vec3d shaped_v = tmpl().rest_vertices.col(v);
      for (int k = 0; k < kShapeDim; ++k)
        shaped_v += p.beta[k] * tmpl().vertex_shape_basis[static_cast<size_t>(v)].col(k);
      const double rest_dist = (shaped_v - shaped_j.col(j)).norm();
      const double posed_dist = (V.col(v) - J.col(j)).norm();
      CHECK(posed_dist == Catch::Approx(rest_dist).margin(1e-10));
    }
  }
}

TEST_CASE("body model Jacobians match finite differences") {
  // Packs (tau, phi, theta, beta) into one vector and checks d(sum of a fixed
  // random projection of all joints+vertices)/d(params) against central
  // differences.
  Rng rng(53);
  Eigen::VectorXd probe_j(3 * kNumJoints), probe_v(3 * kNumVertices);
  for (int i = 0; i < probe_j.size(); ++i) probe_j[i] = rng.normal();
  for (int i = 0; i < probe_v.size(); ++i) probe_v[i] = rng.normal();

  constexpr int n = 3 + 6 + kThetaDim + kShapeDim;
  auto unpack = [](const Eigen::VectorXd& x) {
    BodyParams p;
    p.tau = x.segment<3>(0);
    p.phi = x.segment<6>(3);
    p.theta = x.segment<kThetaDim>(9);
    p.beta = x.segment<kShapeDim>(9 + kThetaDim);
    return p;
  };
  auto f = [&](const Eigen::VectorXd& x) {
    const BodyParams p = unpack(x);
    const auto J = joints<double>(p, tmpl());
    const auto V = vertices<double>(p, tmpl());
    double acc = 0.0;
    for (int j = 0; j < kNumJoints; ++j) acc += probe_j.segment<3>(3 * j).dot(J.col(j));
    for (int v = 0; v < kNumVertices; ++v) acc += probe_v.segment<3>(3 * v).dot(V.col(v));
    return acc;
  };

  using J32 = ceres::Jet<double, 32>;
  auto grad_ad = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(n);
    for (int base = 0; base < n; base += 32) {
      const int width = std::min(32, n - base);
      BodyParamsT<J32> p;
      Eigen::Matrix<J32, Eigen::Dynamic, 1> xx(n);
      for (int i = 0; i < n; ++i) {
        xx[i] = J32(x[i]);
        if (i >= base && i < base + width) xx[i].v[i - base] = 1.0;
      }
      p.tau = xx.segment<3>(0);
      p.phi = xx.segment<6>(3);
      p.theta = xx.segment<kThetaDim>(9);
      p.beta = xx.segment<kShapeDim>(9 + kThetaDim);
      const auto J = joints<J32>(p, tmpl());
      const auto V = vertices<J32>(p, tmpl());
      J32 acc(0.0);
      for (int j = 0; j < kNumJoints; ++j)
        for (int r = 0; r < 3; ++r) acc += probe_j[3 * j + r] * J(r, j);
      for (int v = 0; v < kNumVertices; ++v)
        for (int r = 0; r < 3; ++r) acc += probe_v[3 * v + r] * V(r, v);
      for (int i = 0; i < width; ++i) g[base + i] = acc.v[i];
    }
    return g;
  };

  for (int trial = 0; trial < 5; ++trial) {
    const BodyParams p = testing::random_params(rng);
    Eigen::VectorXd x(n);
    x.segment<3>(0) = p.tau;
    x.segment<6>(3) = p.phi;
    x.segment<kThetaDim>(9) = p.theta;
    x.segment<kShapeDim>(9 + kThetaDim) = p.beta;

    const Eigen::VectorXd g_fd = testing::finite_difference_gradient(f, x);
    const Eigen::VectorXd g_ad = grad_ad(x);
    CHECK(testing::max_relative_error(g_ad, g_fd) < 1e-4);
  }
}

TEST_CASE("model bundle JSON round trip is exact") {
  const Model m = make_default_model(2024);
  const auto path = std::filesystem::temp_directory_path() / "airpose_model_test.json";
  save_model(m, path.string());
  const Model back = load_model(path.string());
  CHECK(back.body.rest_joints == m.body.rest_joints);
  CHECK(back.body.rest_vertices == m.body.rest_vertices);
  CHECK(back.body.parent == m.body.parent);
  CHECK(back.body.vertex_joint == m.body.vertex_joint);
  for (int j = 0; j < kNumJoints; ++j)
    CHECK(back.body.joint_shape_basis[static_cast<size_t>(j)] == m.body.joint_shape_basis[static_cast<size_t>(j)]);
  for (int v = 0; v < kNumVertices; ++v)
    CHECK(back.body.vertex_shape_basis[static_cast<size_t>(v)] == m.body.vertex_shape_basis[static_cast<size_t>(v)]);
  CHECK(back.prior.D == m.prior.D);
  std::filesystem::remove(path);
}

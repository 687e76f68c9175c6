#pragma once

#include <Eigen/Dense>

#include <functional>

#include "airpose/body_model.hpp"
#include "airpose/rng.hpp"
#include "airpose/rotation.hpp"

namespace airpose::testing {

// Independent central-difference gradient oracle. Deliberately knows nothing
// about the library's derivative machinery.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline Mat3d random_rotation(Rng& rng) {
  // Uniformish: normalized random quaternion.
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = rng.normal();
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

inline Vec6d random_rot6d(Rng& rng) {
  return rot6d_encode(random_rotation(rng));
}

inline BodyParams random_params(Rng& rng, double tau_scale = 1.0, double beta_scale = 0.5) {
  BodyParams p;
  for (int i = 0; i < 3; ++i) p.tau[i] = tau_scale * rng.normal();
  p.phi = random_rot6d(rng);
  for (int j = 0; j < kNumPoseJoints; ++j) p.theta.segment<6>(6 * j) = random_rot6d(rng);
  for (int k = 0; k < kShapeDim; ++k) p.beta[k] = beta_scale * rng.normal();
  return p;
}

}  // namespace airpose::testing

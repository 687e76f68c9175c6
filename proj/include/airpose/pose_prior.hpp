#pragma once

#include "airpose/rng.hpp"
#include "airpose/rotation.hpp"
#include "airpose/types.hpp"

namespace airpose {

// Linear-Gaussian latent pose prior: theta = theta_identity + D v with
// D orthonormal-column (126 x 32). encode is the adjoint projection, so
// encode(decode(v)) = v and the prior penalty is just ||encode(theta)||^2.
struct PriorBasis {
  int version = 1;
  std::uint64_t seed = 0;
  Eigen::Matrix<double, kThetaDim, kLatentDim> D;
};

inline PriorBasis make_default_prior(std::uint64_t seed = 2024) {
  PriorBasis basis;
  basis.seed = seed;
  Rng rng(Rng::derive_seed(seed, 0xb0));
  Eigen::Matrix<double, kThetaDim, kLatentDim> G;
  for (int r = 0; r < kThetaDim; ++r)
    for (int c = 0; c < kLatentDim; ++c) G(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(kThetaDim, kLatentDim);
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(kLatentDim, kLatentDim);
  for (int c = 0; c < kLatentDim; ++c)
    if (R(c, c) < 0) Q.col(c) = -Q.col(c);
  basis.D = Q;
  return basis;
}

template <typename T>
ThetaVecT<T> prior_decode(const LatentVecT<T>& v, const PriorBasis& basis) {
  const ThetaVec id = identity_theta();
  ThetaVecT<T> theta;
  for (int r = 0; r < kThetaDim; ++r) {
    T acc(id[r]);
    for (int c = 0; c < kLatentDim; ++c) acc += basis.D(r, c) * v[c];
    theta[r] = acc;
  }
  return theta;
}

template <typename T>
LatentVecT<T> prior_encode(const ThetaVecT<T>& theta, const PriorBasis& basis) {
  const ThetaVec id = identity_theta();
  LatentVecT<T> v;
  for (int c = 0; c < kLatentDim; ++c) {
    T acc(0);
    for (int r = 0; r < kThetaDim; ++r) acc += basis.D(r, c) * (theta[r] - T(id[r]));
    v[c] = acc;
  }
  return v;
}

}  // namespace airpose

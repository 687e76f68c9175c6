#include <catch2/catch_amalgamated.hpp>

#include "airpose/pose_prior.hpp"
#include "airpose/rng.hpp"

using namespace airpose;

namespace {
const PriorBasis& basis() {
  static const PriorBasis b = make_default_prior();
  return b;
}
}  // namespace

TEST_CASE("basis columns are orthonormal") {
  const auto G = basis().D.transpose() * basis().D;
  CHECK((G - Eigen::MatrixXd::Identity(kLatentDim, kLatentDim)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("zero latent decodes to the identity pose") {
  const ThetaVec theta = prior_decode<double>(LatentVec::Zero(), basis());
  CHECK((theta - identity_theta()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("decode offsets are additive and norm preserving") {
  Rng rng(61);
  LatentVec a, b;
  for (int i = 0; i < kLatentDim; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  const ThetaVec d0 = prior_decode<double>(LatentVec::Zero(), basis());
  const ThetaVec da = prior_decode<double>(a, basis());
  const ThetaVec db = prior_decode<double>(b, basis());
  const ThetaVec dab = prior_decode<double>((a + b).eval(), basis());
  CHECK(((dab - d0) - ((da - d0) + (db - d0))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((da - d0).norm() == Catch::Approx(a.norm()).epsilon(1e-10));
}

TEST_CASE("encode is the latent round trip inverse") {
  CHECK(prior_encode<double>(identity_theta(), basis()).cwiseAbs().maxCoeff() < 1e-14);
  Rng rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    LatentVec v;
    for (int i = 0; i < kLatentDim; ++i) v[i] = rng.normal();
    const LatentVec back = prior_encode<double>(prior_decode<double>(v, basis()), basis());
    CHECK((back - v).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("encode is a non-expansive projection") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    ThetaVec theta;
    for (int i = 0; i < kThetaDim; ++i) theta[i] = rng.normal();
    const LatentVec v = prior_encode<double>(theta, basis());
    CHECK(v.norm() <= (theta - identity_theta()).norm() + 1e-12);
  }
  // ||encode(theta)|| vanishes iff theta - identity is orthogonal to range(D)
  ThetaVec theta;
  for (int i = 0; i < kThetaDim; ++i) theta[i] = rng.normal();
  const ThetaVec off = theta - identity_theta();
  const ThetaVec perp = off - basis().D * (basis().D.transpose() * off);
  CHECK(prior_encode<double>((identity_theta() + perp).eval(), basis()).norm() < 1e-10);
}

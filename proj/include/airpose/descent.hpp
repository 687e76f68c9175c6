#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace airpose {

// Shared first-order descent direction: the gradient under a running
// mean-square diagonal preconditioner (floored at a fraction of the largest
// coordinate scale), plus Polak-Ribiere conjugate memory with a restart
// whenever the combined direction stops being a descent direction. Callers
// pair it with Armijo backtracking, which keeps accepted losses strictly
// decreasing.
class CgDirection {
 public:
  Eigen::VectorXd operator()(const Eigen::VectorXd& g) {
    if (mean_sq_.size() == 0)
      mean_sq_ = g.cwiseProduct(g);
    else
      mean_sq_ = kDecay * mean_sq_ + (1.0 - kDecay) * g.cwiseProduct(g);
    const double floor = 1e-3 * std::sqrt(mean_sq_.maxCoeff()) + 1e-300;
    Eigen::VectorXd dir(g.size());
    for (int i = 0; i < g.size(); ++i) dir[i] = g[i] / (std::sqrt(mean_sq_[i]) + floor);
    if (have_prev_) {
      const double beta_pr = std::max(0.0, (g - g_prev_).dot(dir) / std::max(1e-300, slope_prev_));
      const Eigen::VectorXd candidate = dir + beta_pr * d_prev_;
      if (g.dot(candidate) > 0.0) dir = candidate;
    }
    g_prev_ = g;
    d_prev_ = dir;
    slope_prev_ = g.dot(dir);
    have_prev_ = true;
    return dir;
  }

  double last_slope() const { return slope_prev_; }

 private:
  static constexpr double kDecay = 0.9;
  Eigen::VectorXd mean_sq_, g_prev_, d_prev_;
  double slope_prev_ = 0.0;
  bool have_prev_ = false;
};

}  // namespace airpose

#pragma once

// Likelihood of a panel after the change of variables
//   v_ij = (t_{i,j+1} - t_ij)^{-1/2} log(x_{i,j+1} / x_ij),
// under which the transitions are independent Gaussians with mean
// m / sqrt(Delta), m = H(t_ij, t_{i,j+1}), and variance sigma^2.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "msl/model.hpp"
#include "msl/panel.hpp"

namespace msl {

/// Transitions sharing the same (t_a, t_b). Panels simulated or observed on a
/// common grid collapse to one group per grid step, so every theta-dependent
/// sum below costs O(groups) rather than O(n).
struct TransitionGroup {
  double ta = 0.0;
  double tb = 0.0;
  double delta = 0.0;
  std::size_t count = 0;
  double sum_v = 0.0;
  double mean_v = 0.0;
  /// sum of (v - mean_v)^2 within the group
  double centered_ss = 0.0;
};

struct VData {
  std::vector<double> v0;  // first observations
  std::vector<std::vector<double>> v1;
  std::vector<std::vector<double>> deltas;
  std::vector<std::vector<double>> times;
  std::vector<TransitionGroup> groups;
  std::size_t n = 0;
  double z1 = 0.0;  // sum v^2
  double z2 = 0.0;  // sum v sqrt(Delta)
  double z3 = 0.0;  // sum Delta

  std::size_t d() const noexcept { return v0.size(); }
};

VData transform(const PathPanel& panel);
PathPanel reconstruct(const VData& vdata);

struct InitialFit {
  double mu1_hat = 0.0;
  double sigma1sq_hat = 0.0;
};

InitialFit fit_initial(const VData& vdata);

/// True when every first observation is identical (including d = 1).
bool degenerate_start(const VData& vdata);

double transition_log_mean(const ModelParams& xi, double ta, double tb);

/// Theta-dependent aggregates. Per-transition quantities are stored once per
/// TransitionGroup, in the order of VData::groups.
struct LikelihoodStats {
  double z1 = 0.0, z2 = 0.0, z3 = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  std::size_t n = 0;
  std::vector<double> lambda;
  /// groups x (p+1), column l holds lD for l = 0..p
  Eigen::MatrixXd lD;
  /// groups x (p+1), derivative of the transition log-mean in (eta, beta)
  Eigen::MatrixXd dm;
  Eigen::VectorXd w, x, y;
  /// sum (v - lambda/sqrt(Delta))^2, accumulated without cancellation.
  double residual_ss = 0.0;

  double sum_squares_identity() const noexcept { return z1 + a - 2.0 * b; }
};

LikelihoodStats compute_stats(const VData& vdata, const GrowthParams& theta);

/// L~(xi) = -(n/2) log sigma^2 - sum (v - m/sqrt(Delta))^2 / (2 sigma^2)
double loglik_tilde(const VData& vdata, const ModelParams& xi);

/// Full log-likelihood. Without an InitialFit the start is treated as
/// degenerate and its factor is dropped.
double loglik(const VData& vdata, const InitialFit& alpha, const ModelParams& xi);
double loglik(const VData& vdata, const ModelParams& xi);

/// Gradient of L~ in (eta, beta_1..beta_p, sigma^2).
Eigen::VectorXd grad_loglik(const VData& vdata, const ModelParams& xi);
Eigen::VectorXd grad_loglik(const LikelihoodStats& s, double sigma2);

/// Hessian of L~ in the same ordering.
Eigen::MatrixXd hessian_loglik(const VData& vdata, const ModelParams& xi);

namespace detail {

/// g(t) = log(eta + e^{-Q(t)}) with first and (optionally) second derivatives
/// in (eta, beta_1..beta_p).
struct LogDenDerivs {
  double g = 0.0;
  Eigen::VectorXd d1;
  Eigen::MatrixXd d2;
};

LogDenDerivs logden_derivs(const GrowthParams& theta, double t, bool second);

}  // namespace detail

/// Parameter vector helpers, ordering (eta, beta_1..beta_p, sigma^2).
Eigen::VectorXd pack(const ModelParams& xi);
ModelParams unpack(const Eigen::VectorXd& v);

}  // namespace msl

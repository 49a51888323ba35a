#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msl/likelihood.hpp"
#include "msl/model.hpp"
#include "msl/panel.hpp"

namespace msl {

struct InitSolution {
  double eta0 = 0.0;
  PolyCoeffs beta0{std::vector<double>{0.0}};
  double sigma2_0 = 0.0;
  double r_squared = 0.0;
  Eigen::VectorXd residuals;
  /// Grid points that entered the theta regression.
  std::size_t points_used = 0;
};

/// Grid points j < N with m_N/m_j - 1 more than z standard errors above zero,
/// the standard error coming from the cross-path spread at t_j and t_N.
struct RatioPoints {
  std::vector<double> t;
  std::vector<double> ratio;  // m_N/m_j - 1
  double first_ratio = 0.0;   // m_N/m_1 - 1
};

RatioPoints ratio_points(const PathPanel& panel, double z = 3.0);

/// Regression of -log(m_N/m_j - 1) on t_j with intercept log(eta).
InitSolution initial_theta(const PathPanel& panel, std::size_t p);

/// eta from the first and last sample means, beta from the regression of
/// -log[(m_N/m_j - 1) eta] on t_j without intercept.
InitSolution initial_theta_ratio(const PathPanel& panel, std::size_t p);

/// Slope of 2 log(m_j / m_j^g) - sigma1sq_hat against t_j - t0, floored at 1e-12.
double initial_sigma2(const PathPanel& panel);

/// Positive root in sigma^2 of sigma^2 (n + sigma^2 Z3 / 4) = Z1 + A - 2B.
double sigma2_root(const LikelihoodStats& stats);
double sigma2_root(double n, double z3, double sum_squares);

/// Residuals of the critical-point system: the sigma^2 equation followed by
/// the p + 1 equations in (eta, beta).
Eigen::VectorXd system_residual(const VData& vdata, const ModelParams& xi);

/// Each residual divided by the sum of magnitudes of its terms.
Eigen::VectorXd scaled_system_residual(const VData& vdata, const ModelParams& xi);

struct NrOptions {
  double tol = 1e-9;
  int max_iter = 200;
  bool damping = true;
  /// Skip the regression start.
  std::optional<GrowthParams> start;
};

struct NrResult {
  ModelParams xi_hat{{1.0, PolyCoeffs({0.0})}, 1.0};
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
  std::vector<double> trace;
  std::string stop_reason;
  std::string start_used;
};

NrResult fit(const VData& vdata, const GrowthParams& start, const NrOptions& opts = {});
/// Tries the intercept start, then the ratio start.
NrResult fit(const PathPanel& panel, std::size_t p, const NrOptions& opts = {});

}  // namespace msl

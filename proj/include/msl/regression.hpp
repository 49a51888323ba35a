#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace msl {

/// Ordinary least squares solved by column-pivoted QR.
struct LsqFit {
  Eigen::VectorXd coef;
  /// s^2 (X^T X)^{-1}
  Eigen::MatrixXd cov;
  Eigen::VectorXd residuals;
  double residual_variance = 0.0;
  double r_squared = 0.0;
  long dof = 0;

  /// Two-sided Student-t interval for coefficient k.
  std::pair<double, double> interval(long k, double confidence) const;
};

LsqFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Columns [1,] t, t^2, ..., t^p.
Eigen::MatrixXd poly_design(std::span<const double> t, std::size_t p, bool intercept);

}  // namespace msl

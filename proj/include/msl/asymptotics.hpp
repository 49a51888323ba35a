#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msl/likelihood.hpp"
#include "msl/model.hpp"

namespace msl {

/// I(xi) = (1/sigma^2) [[Xi, cross], [cross^T, n/(2 sigma^2) + Z3/4]].
struct FisherInfo {
  Eigen::MatrixXd matrix;
  /// sum over transitions of (dm/dtheta)(dm/dtheta)^T / Delta
  Eigen::MatrixXd xi_block;
  /// -(1/2) sum over transitions of dm/dtheta
  Eigen::VectorXd cross;
  double sigma2_entry = 0.0;
};

FisherInfo fisher_info(const VData& vdata, const ModelParams& xi);

struct Covariance {
  Eigen::MatrixXd matrix;
  /// Condition number of the equilibrated information matrix.
  double condition = 0.0;
};

/// Inverse through diagonal equilibration and a symmetric eigensolve; refuses
/// when the equilibrated condition number exceeds max_condition.
Covariance invert_fisher(const FisherInfo& fi, double max_condition = 1e12);

struct CiEntry {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  /// One interval per requested level, in the same order.
  std::vector<std::pair<double, double>> intervals;
  /// For parametric functions: gradient with respect to xi.
  Eigen::VectorXd gradient;
};

struct CiReport {
  std::vector<double> levels;
  std::vector<CiEntry> entries;
  double condition = 0.0;
  Eigen::MatrixXd covariance;
};

CiReport confidence_intervals(const FisherInfo& fi, const ModelParams& xi_hat,
                              const std::vector<double>& levels = {0.95, 0.90, 0.75});

/// Delta-method entry for g(xi) with the given gradient; appended to the report.
const CiEntry& add_function(CiReport& report, const std::string& name, double value, const Eigen::VectorXd& gradient);

/// Central-difference gradient of a scalar function of xi.
Eigen::VectorXd numeric_gradient(const std::function<double(const ModelParams&)>& g, const ModelParams& xi);

/// Exact sampling laws of the initial-distribution estimators:
/// mu1_hat ~ N(mu1, sigma1sq / d) and d sigma1sq_hat / sigma1sq ~ chi^2_{d-1}.
struct InitialParamLaws {
  std::size_t d = 0;
  double mu1_variance = 0.0;
  double chi2_dof = 0.0;
};

InitialParamLaws initial_param_laws(std::size_t d, double sigma1sq);

/// Exact interval for mu1 from the Student-t pivot.
std::pair<double, double> mu1_interval(double mu1_hat, double sigma1sq_hat, std::size_t d, double level);
/// Exact interval for sigma1sq from the chi-square pivot.
std::pair<double, double> sigma1sq_interval(double sigma1sq_hat, std::size_t d, double level);

}  // namespace msl

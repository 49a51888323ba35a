#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msl/likelihood.hpp"
#include "msl/model.hpp"
#include "msl/panel.hpp"

namespace msl {

/// Mean absolute relative error of a fitted mean against the sample mean.
double rae(std::span<const double> sample_mean, std::span<const double> fitted_mean);

struct InfoCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

/// Parameter count p + 2.
InfoCriteria aic_bic(std::size_t p, double loglik_value, double n);

/// Law of log X(t): normal with mean mu and variance var.
struct LognormalLaw {
  double mu = 0.0;
  double var = 0.0;
};

/// KL(c || s) between two lognormal laws.
double kl_divergence(const LognormalLaw& c, const LognormalLaw& s);

/// KL(c||s) KL(s||c) / (KL(c||s) + KL(s||c)), zero when both vanish.
double resistor_average(const LognormalLaw& c, const LognormalLaw& s);

/// mu = log m_g, var = 2 log(m / m_g) floored at 1e-12.
LognormalLaw sample_law(double mean, double geometric_mean);

/// Law of log X(t) under xi for a lognormal (or degenerate) start at t0.
LognormalLaw fitted_law(const ModelParams& xi, const LognormalStart& start, double t0, double t);

/// Start estimated from the panel: (mu1_hat, sigma1sq_hat).
LognormalStart estimated_start(const VData& vdata);

/// Maximized log-likelihood used for AIC and BIC: the full likelihood, with
/// the initial factor dropped when the start is degenerate.
double fitted_loglik(const VData& vdata, const ModelParams& xi);

/// Fitted mean E[X(t_j)] on the panel's grid.
std::vector<double> fitted_mean(const PathPanel& panel, const ModelParams& xi);

struct DegreeFit {
  std::size_t p = 0;
  bool ok = false;
  std::string error;
  ModelParams xi{{1.0, PolyCoeffs({0.0})}, 1.0};
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double rae = 0.0;
  double dra_median = 0.0;
  double dra_mean = 0.0;
  std::vector<double> dra_curve;
};

struct GoodnessReport {
  std::vector<DegreeFit> degrees;
  std::size_t chosen_p = 0;
  std::vector<double> dra_times;
};

using Fitter = std::function<ModelParams(const PathPanel&, std::size_t)>;
/// Law to compare the fitted law against at time t; defaults to the sample law.
using ReferenceLaw = std::function<LognormalLaw(double)>;

/// Smallest p whose BIC is within `tie` of the minimum BIC.
std::size_t choose_degree(const std::vector<DegreeFit>& fits, double tie = 2.0);

GoodnessReport select_degree(const PathPanel& panel, const std::vector<std::size_t>& p_range, const Fitter& fitter,
                             const ReferenceLaw& reference = {});

}  // namespace msl

#pragma once

// Deterministic multisigmoidal logistic curve and the closed-form moments of
// the lognormal diffusion built on it.
//
//   Q(t) = sum_i beta_i t^i,  P = Q'
//   l(t) = l0 (eta + exp(-Q(t0))) / (eta + exp(-Q(t)))
//   dX = h(t) X dt + sigma X dW,  h(t) = P(t) exp(-Q(t)) / (eta + exp(-Q(t)))
//
// Times are absolute: Q has no constant term, so every identity below holds
// for any t0 without shifting the origin.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace msl {

/// Coefficients beta_1..beta_p of a polynomial without constant term.
class PolyCoeffs {
 public:
  explicit PolyCoeffs(std::vector<double> beta);

  std::size_t degree() const noexcept { return beta_.size(); }
  std::span<const double> coefficients() const noexcept { return beta_; }
  /// beta_i for i in 1..p.
  double beta(std::size_t i) const { return beta_.at(i - 1); }
  bool leading_positive() const noexcept { return beta_.back() > 0.0; }

  double value(double t) const noexcept;              // Q(t)
  double derivative(double t) const noexcept;         // P(t)
  double second_derivative(double t) const noexcept;  // P'(t)

 private:
  std::vector<double> beta_;
};

/// theta = (eta, beta).
struct GrowthParams {
  double eta;
  PolyCoeffs poly;

  void validate() const;
};

/// xi = (eta, beta, sigma^2).
struct ModelParams : GrowthParams {
  double sigma2;

  void validate() const;
};

struct DegenerateStart {
  double x0;
};

/// X(t0) ~ LN(mu1, sigma1sq).
struct LognormalStart {
  double mu1;
  double sigma1sq;
};

using InitialDistribution = std::variant<DegenerateStart, LognormalStart>;

void validate(const InitialDistribution& init);
/// Mean and variance of log X(t0).
LognormalStart log_moments(const InitialDistribution& init);

/// log(eta + exp(-Q(t))), evaluated without overflow for strongly negative Q.
double log_denominator(const GrowthParams& g, double t) noexcept;

/// exp(-Q) / (eta + exp(-Q)), always in [0, 1].
double decay_weight(const GrowthParams& g, double t) noexcept;

double curve(const GrowthParams& g, double l0, double t0, double t);
double carrying_capacity(const GrowthParams& g, double l0, double t0);
double drift_rate(const GrowthParams& g, double t) noexcept;

/// H(t0, t) = log[(eta + e^{-Q(t0)}) / (eta + e^{-Q(t)})] - sigma^2 (t - t0) / 2.
double integrated_drift(const ModelParams& xi, double t0, double t);

double conditional_mean(const GrowthParams& g, double x0, double t0, double t);

/// E[X(t)] for a random start.
double process_mean(const GrowthParams& g, const InitialDistribution& init, double t0, double t);

/// alpha-percentile of X(t).
double percentile(const ModelParams& xi, const InitialDistribution& init, double t0, double t, double alpha);

/// r(t) = P'(t) - P(t)^2 (eta - e^{-Q}) / (eta + e^{-Q}). The second derivative
/// of the curve equals decay_weight * r * l, so the two share sign.
double inflection_residual(const GrowthParams& g, double t) noexcept;

struct InflectionSet {
  std::vector<double> times;
  std::vector<double> values;
  /// Roots of the residual where it touches zero without changing sign. They
  /// are not inflections and are reported here only for inspection.
  std::vector<double> excluded;
};

InflectionSet inflection_points(const GrowthParams& g, double l0, double t0, double t_max);

}  // namespace msl

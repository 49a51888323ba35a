#pragma once

// First passage of X through a constant boundary S. With
// Z(t) = log X(t) - log x0 - H(t0, t), Z is a driftless Brownian motion with
// variance rate sigma^2 started at 0, and the passage of X through S is the
// passage of Z through B(t) = log(S / x0) - H(t0, t). Its density solves the
// second-kind Volterra equation
//   g(t) = -2 psi(B(t), t | 0, t0) + 2 int_{t0}^{t} g(tau) psi(B(t), t | B(tau), tau) dtau
// with psi(B(t), t | y, tau) = [B'(t) - (B(t) - y) / (t - tau)] f(B(t), t | y, tau) / 2,
// f the Gaussian transition density. Signs flip when x0 > S.

#include <cstddef>
#include <optional>
#include <vector>

#include "msl/model.hpp"

namespace msl {

struct FptProblem {
  ModelParams params;
  double x0 = 1.0;
  double t0 = 0.0;
  double boundary = 2.0;
  double t_max = 1.0;

  void validate() const;
  bool upward() const noexcept { return boundary > x0; }
};

/// P[X(t) > S] for an upward problem, P[X(t) < S] otherwise.
double fptl(const FptProblem& problem, double t);

struct TimeInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FptlCurve {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<TimeInterval> growth;
};

/// FPTL on a uniform scouting grid; growth intervals are maximal runs of
/// scouting steps over which FPTL rises by more than `rise`.
FptlCurve fptl_curve(const FptProblem& problem, std::size_t points = 2001, double rise = 1e-4);

struct StepPolicy {
  /// fine step = growth-interval width / fine_divisor
  double fine_divisor = 400.0;
  /// coarse step = coarse_factor * fine step
  double coarse_factor = 10.0;
  /// Steps are divided by this factor (used for refinement studies).
  double refinement = 1.0;
};

/// Integration nodes from t0 to t_max inclusive: fine inside growth
/// intervals, coarse elsewhere. Without growth intervals the coarse step is
/// (t_max - t0) / fine_divisor.
std::vector<double> adaptive_steps(const FptlCurve& curve, double t0, double t_max, const StepPolicy& policy = {});

struct FptSummary {
  double mean = 0.0;
  double sd = 0.0;
  double mode = 0.0;
  double decile1 = 0.0;
  double decile5 = 0.0;
  double decile9 = 0.0;
};

struct FptDensity {
  std::vector<double> times;
  std::vector<double> density;
  /// trapezoid integral of the density up to each node
  std::vector<double> cumulative;
  double captured_mass = 0.0;
  /// Summaries of the density normalized by the captured mass.
  FptSummary summary;
  bool short_horizon = false;
  bool negative_density = false;
  double min_density = 0.0;
};

/// Solves on the given nodes (first node must be t0).
FptDensity solve_density(const FptProblem& problem, const std::vector<double>& nodes);
/// Solves on the FPTL-driven adaptive grid.
FptDensity solve_density(const FptProblem& problem, const StepPolicy& policy = {});

/// Summaries of a tabulated density.
FptSummary summarize(const std::vector<double>& times, const std::vector<double>& density);

/// Smallest t >= t0 with curve(t) = S, or none when the curve never gets there.
std::optional<double> crossing_time_deterministic(const GrowthParams& g, double l0, double t0, double boundary);

}  // namespace msl

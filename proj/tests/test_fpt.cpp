#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "msl/error.hpp"
#include "msl/fpt.hpp"
#include "msl/model.hpp"
#include "support/oracles.hpp"

using namespace msl;
using test::make_params;

namespace {

FptProblem reference_problem(double sigma2 = 1e-4, double t_max = 60.0) {
  return FptProblem{make_params(std::exp(-1.0), {0.1, -0.009, 0.0002}, sigma2), 5.0, 0.0, 15.0, t_max};
}

double c_of(const FptProblem& p, double t) {
  const double h = test::log_den(p.params, p.t0) - test::log_den(p.params, t) - 0.5 * p.params.sigma2 * (t - p.t0);
  return (std::log(p.boundary) - std::log(p.x0) - h) / std::sqrt(p.params.sigma2 * (t - p.t0));
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin());
  const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return (1 - w) * y[k - 1] + w * y[k];
}

}  // namespace

TEST(Fptl, ClosedForm) {
  const auto p = reference_problem();
  for (double t : {0.5, 10.0, 30.0, 38.0, 40.0, 42.5, 55.0}) {
    EXPECT_NEAR(fptl(p, t), 1.0 - test::phi(c_of(p, t)), 1e-12) << t;
  }
  auto down = p;
  down.x0 = 20.0;
  for (double t : {5.0, 40.0}) EXPECT_NEAR(fptl(down, t), test::phi(c_of(down, t)), 1e-12);
  EXPECT_LT(fptl(p, 1e-6), 1e-300);
  EXPECT_THROW(fptl(p, 0.0), Error);
}

TEST(Fptl, LargeTimeLimit) {
  // Q grows without bound, so log(eta + e^-Q) -> log(eta) and log X(t) is
  // normal with mean log x0 + log((eta + 1) / eta) - sigma^2 t / 2.
  auto p = make_params(0.5, {0.2}, 1e-3);
  const FptProblem prob{p, 1.0, 0.0, 2.5, 400.0};
  for (double t : {150.0, 300.0}) {
    const double mu = std::log(1.5 / 0.5) - 0.5 * p.sigma2 * t;
    const double want = 1.0 - test::phi((std::log(2.5) - mu) / std::sqrt(p.sigma2 * t));
    EXPECT_NEAR(fptl(prob, t), want, 1e-12);
  }
}

TEST(Fptl, ReferenceShape) {
  const auto c = fptl_curve(reference_problem());
  ASSERT_EQ(c.growth.size(), 1u);
  EXPECT_LT(c.growth[0].lo, 40.0);
  EXPECT_GT(c.growth[0].hi, 40.0);
  EXPECT_LT(c.growth[0].hi - c.growth[0].lo, 10.0);
  EXPECT_EQ(c.times.size(), 2001u);
  for (double v : c.values) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  EXPECT_LT(fptl(reference_problem(), 30.0), 1e-6);
  EXPECT_GT(fptl(reference_problem(), 45.0), 0.99);
}

TEST(Steps, FlatCurveUniform) {
  // Boundary above the carrying capacity: FPTL never rises.
  auto p = reference_problem();
  p.boundary = 100.0;
  const auto c = fptl_curve(p);
  EXPECT_TRUE(c.growth.empty());
  const auto n = adaptive_steps(c, 0.0, 60.0);
  EXPECT_EQ(n.size(), 401u);
  for (std::size_t k = 1; k < n.size(); ++k) EXPECT_NEAR(n[k] - n[k - 1], 0.15, 1e-12);
}

TEST(Steps, ReferenceSchedule) {
  const auto c = fptl_curve(reference_problem());
  const auto n = adaptive_steps(c, 0.0, 60.0);
  EXPECT_EQ(n.front(), 0.0);
  EXPECT_EQ(n.back(), 60.0);
  const auto g = c.growth[0];
  const double fine = (g.hi - g.lo) / 400.0;
  std::size_t inside = 0;
  for (std::size_t k = 1; k < n.size(); ++k) {
    const double h = n[k] - n[k - 1];
    EXPECT_GT(h, 0.0);
    EXPECT_LE(h, 10.0 * fine * (1 + 1e-9));
    if (n[k] > g.lo && n[k] < g.hi) {
      ++inside;
      EXPECT_LE(h, fine * (1 + 1e-9));
    }
  }
  EXPECT_GE(inside, 399u);
  // Node density inside the growth interval is ten times the outside one.
  const double in_rate = inside / (g.hi - g.lo);
  const double out_rate = (n.size() - inside) / (60.0 - (g.hi - g.lo));
  EXPECT_GT(in_rate / out_rate, 9.0);
}

TEST(Density, ReferenceSummaries) {
  const auto d = solve_density(reference_problem());
  // Reference summaries: mean 40.18765, mode 39.92321, deciles 39.02346, 40.11264, 41.58065.
  EXPECT_LT(test::rel_err(d.summary.mean, 40.18765), 0.005);
  EXPECT_LT(test::rel_err(d.summary.mode, 39.92321), 0.005);
  EXPECT_LT(test::rel_err(d.summary.decile1, 39.02346), 0.005);
  EXPECT_LT(test::rel_err(d.summary.decile5, 40.11264), 0.005);
  EXPECT_LT(test::rel_err(d.summary.decile9, 41.58065), 0.005);
  EXPECT_GT(d.captured_mass, 0.99);
  EXPECT_FALSE(d.short_horizon);
  EXPECT_FALSE(d.negative_density);
  EXPECT_GE(d.min_density, -1e-9);
  for (std::size_t k = 1; k < d.cumulative.size(); ++k) EXPECT_GE(d.cumulative[k], d.cumulative[k - 1]);
  EXPECT_LE(d.cumulative.back(), 1.0 + 1e-6);
  const auto top = std::max_element(d.density.begin(), d.density.end()) - d.density.begin();
  EXPECT_NEAR(d.summary.mode, d.times[static_cast<std::size_t>(top)], 2 * (d.times[top + 1] - d.times[top]));
}

TEST(Density, MatchesMonteCarlo) {
  const auto p = reference_problem();
  const auto d = solve_density(p);
  auto tau = test::mc_passage_times(p.params, p.x0, p.t0, p.boundary, p.t_max, 0.01, 10000, 77);
  std::sort(tau.begin(), tau.end());
  double ks = 0.0;
  const double n = static_cast<double>(tau.size());
  for (std::size_t i = 0; i < tau.size() && std::isfinite(tau[i]); ++i) {
    const double f = interp(d.times, d.cumulative, tau[i]);
    ks = std::max({ks, std::abs((i + 1) / n - f), std::abs(i / n - f)});
  }
  EXPECT_LT(ks, 0.02);
}

TEST(Density, RefinementConverges) {
  const auto p = reference_problem();
  const auto a = solve_density(p);
  StepPolicy half;
  half.refinement = 2.0;
  const auto b = solve_density(p, half);
  EXPECT_LT(test::rel_err(a.summary.mean, b.summary.mean), 1e-3);
  EXPECT_LT(test::rel_err(a.summary.mode, b.summary.mode), 1e-3);
}

TEST(Density, SmallSigmaConcentratesAtCrossing) {
  const auto p = reference_problem(1e-8);
  const auto ts = crossing_time_deterministic(p.params, p.x0, p.t0, p.boundary);
  ASSERT_TRUE(ts.has_value());
  StepPolicy pol;
  pol.coarse_factor = 200.0;
  const auto d = solve_density(p, pol);
  const auto k = static_cast<std::size_t>(std::upper_bound(d.times.begin(), d.times.end(), *ts) - d.times.begin());
  EXPECT_LE(std::abs(d.summary.mode - *ts), d.times[k] - d.times[k - 1]);
  EXPECT_LT(d.summary.sd, 0.05);
}

TEST(Density, ShortHorizonFlagged) {
  const auto d = solve_density(reference_problem(1e-4, 41.0));
  EXPECT_TRUE(d.short_horizon);
  EXPECT_LT(d.captured_mass, 0.95);
}

TEST(Density, NodeValidation) {
  const auto p = reference_problem();
  EXPECT_THROW(solve_density(p, std::vector<double>{1.0, 2.0, 3.0}), Error);
  EXPECT_THROW(solve_density(p, std::vector<double>{0.0, 2.0, 2.0}), Error);
  auto bad = p;
  bad.boundary = bad.x0;
  EXPECT_THROW(solve_density(bad), Error);
}

TEST(Crossing, Deterministic) {
  const auto g = test::cubic_truth();
  EXPECT_FALSE(crossing_time_deterministic(g, 5.0, 0.0, 20.0).has_value());
  EXPECT_EQ(crossing_time_deterministic(g, 5.0, 0.0, 5.0).value(), 0.0);
  // Independent bisection on the closed-form curve.
  auto f = [&](double t) { return 5.0 * std::exp(test::log_den(g, 0.0) - test::log_den(g, t)) - 15.0; };
  double lo = 30.0, hi = 45.0;
  ASSERT_LT(f(lo), 0.0);
  ASSERT_GT(f(hi), 0.0);
  for (int k = 0; k < 100; ++k) (f(0.5 * (lo + hi)) < 0.0 ? lo : hi) = 0.5 * (lo + hi);
  EXPECT_NEAR(crossing_time_deterministic(g, 5.0, 0.0, 15.0).value(), lo, 1e-9);
  EXPECT_NEAR(lo, 40.086, 1e-3);
}

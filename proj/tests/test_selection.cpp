#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "msl/error.hpp"
#include "msl/fit_nr.hpp"
#include "msl/rng.hpp"
#include "msl/selection.hpp"
#include "msl/simulate.hpp"
#include "support/oracles.hpp"

using namespace msl;

namespace {

ModelParams nr_fitter(const PathPanel& p, std::size_t k) {
  const auto r = fit(p, k);
  if (!r.converged) throw Error(ErrorKind::numerical, "no convergence");
  return r.xi_hat;
}

double normal_logpdf(double x, const LognormalLaw& l) {
  return -0.5 * (x - l.mu) * (x - l.mu) / l.var - 0.5 * std::log(2.0 * std::numbers::pi * l.var);
}

// KL by quadrature on the log scale (KL is invariant under the exp map).
double kl_quadrature(const LognormalLaw& c, const LognormalLaw& s) {
  const double w = 12.0 * std::sqrt(c.var);
  return test::integrate(
      [&](double x) {
        const double lc = normal_logpdf(x, c);
        return std::exp(lc) * (lc - normal_logpdf(x, s));
      },
      c.mu - w, c.mu + w, 1e-12);
}

}  // namespace

TEST(Rae, HandValues) {
  const std::vector<double> m{1.0, 1.0}, f{1.1, 0.9};
  EXPECT_NEAR(rae(m, f), 0.1, 1e-15);
  EXPECT_EQ(rae(m, m), 0.0);
  const std::vector<double> m2{2.0, 4.0}, f2{3.0, 3.0};
  EXPECT_NEAR(rae(m2, f2), 0.375, 1e-15);
}

TEST(Rae, ScaleInvariant) {
  CounterRng rng(4, 0);
  std::vector<double> m, f, mc, fc;
  for (int i = 0; i < 50; ++i) {
    m.push_back(rng.uniform(0.5, 3.0));
    f.push_back(rng.uniform(0.5, 3.0));
    mc.push_back(7.3 * m.back());
    fc.push_back(7.3 * f.back());
  }
  EXPECT_NEAR(rae(m, f), rae(mc, fc), 1e-14);
}

TEST(Rae, Errors) {
  const std::vector<double> a{1.0, 2.0}, b{1.0}, z{0.0, 1.0};
  try {
    rae(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
  EXPECT_THROW(rae(z, a), Error);
}

TEST(InfoCriteria, HandValues) {
  const auto c = aic_bic(3, 0.0, std::exp(2.0));
  EXPECT_DOUBLE_EQ(c.aic, 10.0);
  EXPECT_NEAR(c.bic, 10.0, 1e-14);
  for (std::size_t p = 1; p <= 6; ++p) {
    const double n = 137.0 * p, l = -42.5 * p;
    const auto q = aic_bic(p, l, n);
    EXPECT_NEAR(q.aic - q.bic, 2.0 * (p + 2) - (p + 2) * std::log(n), 1e-10);
  }
  EXPECT_THROW(aic_bic(2, 0.0, 0.0), Error);
}

TEST(Kl, ClosedCases) {
  const LognormalLaw a{0.3, 0.2};
  EXPECT_EQ(kl_divergence(a, a), 0.0);
  const LognormalLaw b{0.3 + 0.4, 0.2};
  EXPECT_NEAR(kl_divergence(a, b), 0.16 / 0.4, 1e-14);
  EXPECT_THROW(kl_divergence(a, LognormalLaw{0.0, 0.0}), Error);
}

TEST(Kl, MatchesQuadratureAndNonnegative) {
  CounterRng rng(17, 0);
  for (int k = 0; k < 200; ++k) {
    const LognormalLaw c{rng.uniform(-1, 1), rng.uniform(0.01, 2.0)};
    const LognormalLaw s{rng.uniform(-1, 1), rng.uniform(0.01, 2.0)};
    const double kl = kl_divergence(c, s);
    EXPECT_GE(kl, 0.0);
    if (k < 30) EXPECT_NEAR(kl, kl_quadrature(c, s), 1e-8 * (1.0 + kl));
  }
}

TEST(ResistorAverage, Properties) {
  const LognormalLaw a{0.0, 1.0}, b{0.5, 1.0};
  // Equal variances make the two directions equal.
  EXPECT_NEAR(resistor_average(a, b), kl_divergence(a, b) / 2.0, 1e-15);
  EXPECT_EQ(resistor_average(a, a), 0.0);
  CounterRng rng(18, 0);
  for (int k = 0; k < 200; ++k) {
    const LognormalLaw c{rng.uniform(-1, 1), rng.uniform(0.01, 2.0)};
    const LognormalLaw s{rng.uniform(-1, 1), rng.uniform(0.01, 2.0)};
    EXPECT_LE(resistor_average(c, s), std::min(kl_divergence(c, s), kl_divergence(s, c)) + 1e-15);
  }
}

TEST(SampleLaw, VarianceFloor) {
  const auto l = sample_law(2.0, 2.0);
  EXPECT_DOUBLE_EQ(l.mu, std::log(2.0));
  EXPECT_EQ(l.var, 1e-12);
  EXPECT_NEAR(sample_law(std::exp(0.5), 1.0).var, 1.0, 1e-15);
}

TEST(ChooseDegree, TieRule) {
  std::vector<DegreeFit> fits(4);
  const double bic[] = {-100.0, -150.0, -151.5, -140.0};
  for (std::size_t k = 0; k < 4; ++k) {
    fits[k].p = k + 2;
    fits[k].ok = true;
    fits[k].bic = bic[k];
  }
  EXPECT_EQ(choose_degree(fits), 3u);
  EXPECT_EQ(choose_degree(fits, 1.0), 4u);
  fits[2].ok = false;
  EXPECT_EQ(choose_degree(fits), 3u);
  for (auto& f : fits) f.ok = false;
  EXPECT_THROW(choose_degree(fits), Error);
}

TEST(SelectDegree, CubicTruthChoosesThree) {
  const auto panel = simulate_panel(test::cubic_spec(1));
  const auto rep = select_degree(panel, {2, 3, 4, 5}, nr_fitter);
  ASSERT_EQ(rep.degrees.size(), 4u);
  EXPECT_EQ(rep.chosen_p, 3u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(rep.degrees[k].p, k + 2);
  const auto& p2 = rep.degrees[0];
  const auto& p3 = rep.degrees[1];
  // Reference values: RAE 0.163198755 at p = 2; D_RA median 1.0767 at p = 2 and 0.00104 at p = 3.
  EXPECT_LT(test::rel_err(p2.rae, 0.163198755), 0.05);
  EXPECT_GT(p2.dra_median, 0.5);
  EXPECT_LT(p3.dra_median, 0.005);
  EXPECT_LT(p3.bic, p2.bic);
  EXPECT_EQ(rep.dra_times.size(), panel.common_grid().size() - 1);
  EXPECT_EQ(p3.dra_curve.size(), rep.dra_times.size());
  for (const auto& d : rep.degrees) {
    EXPECT_TRUE(d.ok);
    EXPECT_TRUE(std::isfinite(d.aic) && std::isfinite(d.bic) && std::isfinite(d.rae));
    EXPECT_NEAR(d.aic - d.bic, 2.0 * (d.p + 2) - (d.p + 2) * std::log(static_cast<double>(transform(panel).n)), 1e-6);
  }
}

TEST(SelectDegree, SingleCandidateAndDeterminism) {
  const auto panel = simulate_panel(test::cubic_spec(2, 40));
  const auto one = select_degree(panel, {3}, nr_fitter);
  EXPECT_EQ(one.chosen_p, 3u);
  const auto a = select_degree(panel, {2, 3, 4}, nr_fitter);
  const auto b = select_degree(panel, {2, 3, 4}, nr_fitter);
  ASSERT_EQ(a.degrees.size(), b.degrees.size());
  for (std::size_t k = 0; k < a.degrees.size(); ++k) {
    EXPECT_EQ(a.degrees[k].bic, b.degrees[k].bic);
    EXPECT_EQ(a.degrees[k].dra_curve, b.degrees[k].dra_curve);
  }
  EXPECT_EQ(a.chosen_p, b.chosen_p);
}

TEST(SelectDegree, Failures) {
  const auto panel = simulate_panel(test::cubic_spec(2, 10));
  EXPECT_THROW(select_degree(panel, {}, nr_fitter), Error);
  const auto failing = [](const PathPanel&, std::size_t) -> ModelParams { throw Error(ErrorKind::numerical, "x"); };
  EXPECT_THROW(select_degree(panel, {2, 3}, failing), Error);
  const auto partial = [](const PathPanel& p, std::size_t k) {
    if (k == 2) throw Error(ErrorKind::numerical, "no");
    return nr_fitter(p, k);
  };
  const auto rep = select_degree(panel, {2, 3}, partial);
  EXPECT_FALSE(rep.degrees[0].ok);
  EXPECT_FALSE(rep.degrees[0].error.empty());
  EXPECT_EQ(rep.chosen_p, 3u);
}

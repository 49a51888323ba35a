#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "msl/error.hpp"
#include "msl/fit_nr.hpp"
#include "msl/fit_sa.hpp"
#include "msl/simulate.hpp"
#include "support/oracles.hpp"

using namespace msl;
using test::rel_err;

namespace {

ParamBox box_around(const ModelParams& xi, double frac) {
  ParamBox b;
  b.eta = {xi.eta * (1 - frac), xi.eta * (1 + frac)};
  for (double v : xi.poly.coefficients()) {
    const double h = std::abs(v) * frac;
    b.beta.push_back({v - h, v + h});
  }
  return b;
}

}  // namespace

TEST(Box, DegenerateEtaWidened) {
  std::vector<Path> paths;
  for (int i = 0; i < 4; ++i) paths.push_back(Path{{0, 1, 2, 3, 4, 5, 6}, {5, 6 + i * 0.01, 9, 13, 17, 19, 20}});
  const auto b = build_box(PathPanel(paths), 1);
  EXPECT_NEAR(b.eta.lo, (1.0 / 3.0) * 0.9, 1e-12);
  EXPECT_NEAR(b.eta.hi, (1.0 / 3.0) * 1.1, 1e-12);
  EXPECT_EQ(b.sigma2.lo, 0.0);
  EXPECT_EQ(b.sigma2.hi, 0.01);
}

TEST(Box, CubicContainsTruth) {
  const auto panel = simulate_panel(test::cubic_spec(1));
  const auto b = build_box(panel, 3);
  const auto truth = test::cubic_truth();
  EXPECT_TRUE(b.eta.contains(truth.eta)) << b.eta.lo << " " << b.eta.hi;
  ASSERT_EQ(b.beta.size(), 3u);
  // The beta intervals are regression intervals on autocorrelated sample
  // means; they are narrow and need not cover the truth. Their centres do
  // land close to it.
  for (std::size_t i = 0; i < 3; ++i) {
    const double mid = 0.5 * (b.beta[i].lo + b.beta[i].hi);
    EXPECT_LT(rel_err(mid, truth.poly.beta(i + 1)), 0.05) << i;
    EXPECT_GT(b.beta[i].width(), 0.0);
  }
  EXPECT_EQ(b.sigma2.hi, 0.01);
}

TEST(Box, NonGrowingPathsExcluded) {
  const GrowthParams g{0.5, PolyCoeffs({0.4})};
  const auto t = uniform_grid(0.0, 20.0, 20);
  auto make = [&](double scale, bool grow) {
    Path p{t, {}};
    for (double s : t) p.values.push_back(grow ? scale * curve(g, 1.0, 0.0, s) : scale * (2.0 - s / 40.0));
    return p;
  };
  // Many growing copies keep the cross-path spread of the sample mean small.
  std::vector<Path> paths{make(1.0, true), make(1.0, false)};
  for (int k = 1; k <= 30; ++k) paths.push_back(make(1.0 + 0.001 * k, true));
  const auto b = build_box(PathPanel(paths), 1);
  EXPECT_EQ(b.excluded_paths, (std::vector<std::size_t>{1}));
  EXPECT_NEAR(b.eta.lo, 1.0 / (curve(g, 1.0, 0.0, 20.0) - 1.0) * 0.9, 1e-9);
  const PathPanel none({make(1.0, false), make(2.0, false)});
  EXPECT_THROW(build_box(none, 1), Error);
}

TEST(Schedule, Validation) {
  SaSchedule s;
  EXPECT_NO_THROW(s.validate());
  s.gamma = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.p0 = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.replications = 0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Anneal, FindsKnownOptimum) {
  // Well-conditioned logistic problem; its optimum is located independently
  // by Newton-Raphson and the box is centred on it.
  const SimSpec spec{test::make_params(1.0, {0.2}, 0.009), DegenerateStart{1.0}, uniform_grid(0, 50, 100), 20, 3};
  const auto panel = simulate_panel(spec);
  const auto nr = fit(panel, 1);
  ASSERT_TRUE(nr.converged);
  const auto box = box_around(nr.xi_hat, 0.1);
  SaSchedule s;
  s.seed = 5;
  const auto r = anneal(transform(panel), box, s);
  const auto best = pack(nr.xi_hat);
  int hits = 0;
  for (const auto& rep : r.per_replication) {
    const auto x = pack(rep.xi);
    bool ok = true;
    for (long k = 0; k < x.size(); ++k) ok = ok && std::abs(x[k] - best[k]) <= 0.01 * box.axis(k).width();
    hits += ok;
  }
  EXPECT_GE(hits, 8);
}

TEST(Anneal, ProposalsStayInBoxAndAcceptanceRule) {
  const auto panel = simulate_panel(test::cubic_spec(2, 40));
  const auto v = transform(panel);
  const auto box = build_box(panel, 3);
  SaSchedule s;
  s.replications = 2;
  s.max_iter = 300;
  int outside = 0, downhill_rejected = 0, rule_broken = 0;
  // Uphill moves binned by their acceptance probability.
  const int bins = 10;
  std::vector<double> expect(bins, 0.0), var(bins, 0.0), seen(bins, 0.0);
  std::vector<double> best(2, 1e300);
  std::vector<double> evaluated_min(2, 1e300);
  const auto r = anneal(v, box, s, [&](const SaEvent& e) {
    outside += !box.contains(e.proposal);
    if (e.delta_f <= 0.0) {
      downhill_rejected += !e.accepted;
    } else {
      const double p = std::exp(-e.delta_f / e.temperature);
      rule_broken += e.accepted != (e.uniform < p);
      const int b = std::min(bins - 1, static_cast<int>(p * bins));
      expect[b] += p;
      var[b] += p * (1 - p);
      seen[b] += e.accepted;
    }
    if (e.accepted) {
      const double f = -loglik_tilde(v, unpack(e.proposal));
      evaluated_min[e.replication] = std::min(evaluated_min[e.replication], f);
    }
  });
  EXPECT_EQ(outside, 0);
  EXPECT_EQ(downhill_rejected, 0);
  EXPECT_EQ(rule_broken, 0);
  double chi2 = 0.0;
  int dof = 0;
  for (int b = 0; b < bins; ++b) {
    if (var[b] < 5.0) continue;
    chi2 += (seen[b] - expect[b]) * (seen[b] - expect[b]) / var[b];
    ++dof;
  }
  ASSERT_GT(dof, 0);
  boost::math::chi_squared dist(dof);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3);
  for (std::size_t k = 0; k < r.per_replication.size(); ++k) {
    const auto& rep = r.per_replication[k];
    EXPECT_TRUE(box.contains(pack(rep.xi)));
    EXPECT_NEAR(rep.objective, -loglik_tilde(v, rep.xi), 1e-9 * std::abs(rep.objective));
    // The reported best is the best accepted state.
    EXPECT_LE(rep.objective, evaluated_min[k] + 1e-9 * std::abs(rep.objective));
    EXPECT_FALSE(rep.stop_reason.empty());
  }
}

TEST(Anneal, DeterministicPerSeed) {
  const auto panel = simulate_panel(test::cubic_spec(4, 20));
  const auto box = build_box(panel, 3);
  SaSchedule s;
  s.replications = 3;
  s.max_iter = 100;
  const auto a = anneal(panel, 3, box, s);
  const auto b = anneal(panel, 3, box, s);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(pack(a.per_replication[k].xi), pack(b.per_replication[k].xi));
  // Sequential (observed) and concurrent runs agree replication by replication.
  const auto c = anneal(panel, 3, box, s, [](const SaEvent&) {});
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(pack(a.per_replication[k].xi), pack(c.per_replication[k].xi));
  s.seed = 2;
  const auto d = anneal(panel, 3, box, s);
  EXPECT_NE(pack(a.per_replication[0].xi), pack(d.per_replication[0].xi));
}

TEST(Anneal, AverageIsMeanOfReplications) {
  const auto panel = simulate_panel(test::cubic_spec(4, 20));
  const auto box = build_box(panel, 3);
  SaSchedule s;
  s.replications = 4;
  s.max_iter = 50;
  const auto r = anneal(panel, 3, box, s);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(5);
  for (const auto& rep : r.per_replication) avg += pack(rep.xi);
  avg /= 4.0;
  EXPECT_LT((avg - pack(r.xi_hat)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(anneal(panel, 2, box, s), Error);
}

TEST(Anneal, CubicReferenceAverages) {
  const auto panel = simulate_panel(test::cubic_spec(1));
  const auto box = build_box(panel, 3);
  const auto r = anneal(panel, 3, box, SaSchedule{});
  // Reference averages.
  EXPECT_LT(rel_err(r.xi_hat.poly.beta(1), 0.101561), 0.15);
  EXPECT_LT(rel_err(r.xi_hat.poly.beta(2), -0.009082552), 0.15);
  EXPECT_LT(rel_err(r.xi_hat.poly.beta(3), 0.0002018522), 0.15);
  EXPECT_LT(rel_err(r.xi_hat.eta, 0.3625206), 0.15);
  for (const auto& rep : r.per_replication) EXPECT_TRUE(box.contains(pack(rep.xi)));
}

#include "msl/fit_sa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msl/error.hpp"
#include "msl/fit_nr.hpp"
#include "msl/numeric.hpp"
#include "msl/regression.hpp"
#include "msl/rng.hpp"

namespace msl {

Interval ParamBox::axis(std::size_t k) const {
  if (k == 0) return eta;
  if (k <= beta.size()) return beta[k - 1];
  if (k == beta.size() + 1) return sigma2;
  fail(ErrorKind::shape, "ParamBox::axis: index out of range");
}

bool ParamBox::contains(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (std::size_t k = 0; k < dim(); ++k) {
    if (!axis(k).contains(x(static_cast<long>(k)))) return false;
  }
  return x(x.size() - 1) > 0.0;
}

ParamBox build_box(const PathPanel& panel, std::size_t p, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorKind::validation, "build_box: confidence must lie in (0,1)");
  ParamBox box;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& v = panel[i].values;
    const double r = v.back() / v.front() - 1.0;
    if (!(r > 0.0)) {
      box.excluded_paths.push_back(i);
      continue;
    }
    lo = std::min(lo, 1.0 / r);
    hi = std::max(hi, 1.0 / r);
  }
  if (box.excluded_paths.size() == panel.size()) {
    fail(ErrorKind::numerical, "build_box: no path ends above its first value");
  }
  if (lo == hi) {
    lo *= 0.9;
    hi *= 1.1;
  }
  box.eta = {lo, hi};

  const auto pts = ratio_points(panel);
  if (!(pts.first_ratio > 0.0) || pts.t.size() < p + 2) {
    fail(ErrorKind::numerical, "build_box: too few usable sample-mean ratios for the beta regression");
  }
  const double eta_hat = 1.0 / pts.first_ratio;
  Eigen::VectorXd y(static_cast<long>(pts.t.size()));
  for (std::size_t j = 0; j < pts.t.size(); ++j) y(static_cast<long>(j)) = -std::log(pts.ratio[j] * eta_hat);
  const auto fit = least_squares(poly_design(pts.t, p, false), y);
  for (std::size_t k = 0; k < p; ++k) {
    const auto [a, b] = fit.interval(static_cast<long>(k), confidence);
    box.beta.push_back({a, b});
  }
  return box;
}

void SaSchedule::validate() const {
  if (!(p0 > 0.0 && p0 < 1.0)) fail(ErrorKind::validation, "SA p0 must lie in (0,1)");
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::validation, "SA gamma must lie in (0,1)");
  if (chain_length < 1 || max_iter < 1 || replications < 1 || pilot_pairs < 1) {
    fail(ErrorKind::validation, "SA chain length, iterations, replications and pilot size must be positive");
  }
  if (!(t_final > 0.0)) fail(ErrorKind::validation, "SA final temperature must be positive");
}

namespace {

ModelParams to_params(const Eigen::VectorXd& x) { return unpack(x); }

Eigen::VectorXd random_point(const ParamBox& box, CounterRng& rng) {
  Eigen::VectorXd x(static_cast<long>(box.dim()));
  for (std::size_t k = 0; k < box.dim(); ++k) {
    const auto iv = box.axis(k);
    x(static_cast<long>(k)) = rng.uniform(iv.lo, iv.hi);
  }
  return x;
}

SaReplication run_one(const VData& vd, const ParamBox& box, const SaSchedule& s, int rep,
                      const SaObserver& observer) {
  CounterRng rng(s.seed, static_cast<std::uint64_t>(rep));
  auto objective = [&](const Eigen::VectorXd& x) { return -loglik_tilde(vd, to_params(x)); };

  // Pilot: mean objective increase between random pairs.
  KahanSum up;
  int ups = 0;
  for (int k = 0; k < s.pilot_pairs; ++k) {
    const double fa = objective(random_point(box, rng));
    const double fb = objective(random_point(box, rng));
    if (fb > fa) {
      up += fb - fa;
      ++ups;
    }
  }
  const double mean_up = ups > 0 ? up.value() / ups : 1.0;
  const double t0 = -mean_up / std::log(s.p0);

  Eigen::VectorXd x = random_point(box, rng);
  double fx = objective(x);
  Eigen::VectorXd best = x;
  double fbest = fx;
  double temp = t0;
  std::vector<double> recent;
  recent.reserve(static_cast<std::size_t>(s.chain_length));
  SaReplication out;
  out.t0 = t0;
  int it = 0;
  for (; it < s.max_iter; ++it) {
    const double radius = std::max(0.1 * temp / t0, 0.001);
    recent.clear();
    for (int k = 0; k < s.chain_length; ++k) {
      Eigen::VectorXd y(x.size());
      for (std::size_t c = 0; c < box.dim(); ++c) {
        const auto iv = box.axis(c);
        const double hw = radius * iv.width();
        const double xc = x(static_cast<long>(c));
        y(static_cast<long>(c)) = rng.uniform(std::max(iv.lo, xc - hw), std::min(iv.hi, xc + hw));
      }
      const double fy = objective(y);
      const double df = fy - fx;
      const double u = rng.uniform();
      const bool accept = df <= 0.0 || u < std::exp(-df / temp);
      if (observer) observer({rep, it, temp, y, df, u, accept});
      if (accept) {
        x = y;
        fx = fy;
        if (fx < fbest) {
          fbest = fx;
          best = x;
        }
      }
      recent.push_back(fx);
    }
    const auto [mn, mx] = std::minmax_element(recent.begin(), recent.end());
    if (*mx - *mn <= 1e-12) {
      out.stop_reason = "stalled";
      ++it;
      break;
    }
    temp *= s.gamma;
    if (temp < s.t_final) {
      out.stop_reason = "final_temperature";
      ++it;
      break;
    }
  }
  if (out.stop_reason.empty()) out.stop_reason = "max_iter";
  out.iterations = it;
  out.xi = to_params(best);
  out.objective = fbest;
  return out;
}

}  // namespace

SaResult anneal(const VData& vdata, const ParamBox& box, const SaSchedule& sched, const SaObserver& observer) {
  sched.validate();
  if (box.beta.empty()) fail(ErrorKind::validation, "anneal: box has no beta intervals");
  for (std::size_t k = 0; k < box.dim(); ++k) {
    if (!(box.axis(k).width() > 0.0)) fail(ErrorKind::validation, "anneal: box has an empty interval");
  }
  SaResult res;
  res.per_replication.resize(static_cast<std::size_t>(sched.replications));
  auto job = [&](std::size_t r) {
    res.per_replication[r] = run_one(vdata, box, sched, static_cast<int>(r), observer);
  };
  if (observer) {
    for (std::size_t r = 0; r < res.per_replication.size(); ++r) job(r);
  } else {
    parallel_for(res.per_replication.size(), job);
  }
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(static_cast<long>(box.dim()));
  for (const auto& r : res.per_replication) avg += pack(r.xi);
  avg /= static_cast<double>(res.per_replication.size());
  res.xi_hat = unpack(avg);
  return res;
}

SaResult anneal(const PathPanel& panel, std::size_t p, const ParamBox& box, const SaSchedule& sched,
                const SaObserver& observer) {
  if (box.beta.size() != p) fail(ErrorKind::shape, "anneal: box degree does not match p");
  return anneal(transform(panel), box, sched, observer);
}

}  // namespace msl

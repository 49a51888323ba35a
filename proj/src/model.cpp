#include "msl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

PolyCoeffs::PolyCoeffs(std::vector<double> beta) : beta_(std::move(beta)) {
  if (beta_.empty()) fail(ErrorKind::domain, "polynomial degree must be at least 1");
  for (double b : beta_) {
    if (!std::isfinite(b)) fail(ErrorKind::domain, "polynomial coefficients must be finite");
  }
}

double PolyCoeffs::value(double t) const noexcept {
  double acc = 0.0;
  for (auto it = beta_.rbegin(); it != beta_.rend(); ++it) acc = (acc + *it) * t;
  return acc;
}

double PolyCoeffs::derivative(double t) const noexcept {
  double acc = 0.0;
  for (std::size_t i = beta_.size(); i >= 1; --i) acc = acc * t + static_cast<double>(i) * beta_[i - 1];
  return acc;
}

double PolyCoeffs::second_derivative(double t) const noexcept {
  double acc = 0.0;
  for (std::size_t i = beta_.size(); i >= 2; --i) {
    acc = acc * t + static_cast<double>(i * (i - 1)) * beta_[i - 1];
  }
  return acc;
}

void GrowthParams::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) fail(ErrorKind::domain, "eta must be positive");
}

void ModelParams::validate() const {
  GrowthParams::validate();
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) fail(ErrorKind::domain, "sigma2 must be positive");
}

void validate(const InitialDistribution& init) {
  if (const auto* d = std::get_if<DegenerateStart>(&init)) {
    if (!(d->x0 > 0.0)) fail(ErrorKind::domain, "degenerate start x0 must be positive");
  } else {
    const auto& ln = std::get<LognormalStart>(init);
    if (!(ln.sigma1sq >= 0.0) || !std::isfinite(ln.mu1)) {
      fail(ErrorKind::domain, "lognormal start needs finite mu1 and sigma1sq >= 0");
    }
  }
}

LognormalStart log_moments(const InitialDistribution& init) {
  validate(init);
  if (const auto* d = std::get_if<DegenerateStart>(&init)) return {std::log(d->x0), 0.0};
  return std::get<LognormalStart>(init);
}

double log_denominator(const GrowthParams& g, double t) noexcept {
  const double a = std::log(g.eta);
  const double b = -g.poly.value(t);
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

double decay_weight(const GrowthParams& g, double t) noexcept {
  return std::exp(-g.poly.value(t) - log_denominator(g, t));
}

namespace {

void require_ordered(double t0, double t, const char* what) {
  if (!(t >= t0)) fail(ErrorKind::domain, std::string(what) + ": requires t >= t0");
}

}  // namespace

double curve(const GrowthParams& g, double l0, double t0, double t) {
  require_ordered(t0, t, "curve");
  if (t == t0) return l0;
  return l0 * std::exp(log_denominator(g, t0) - log_denominator(g, t));
}

double carrying_capacity(const GrowthParams& g, double l0, double t0) {
  if (!g.poly.leading_positive()) {
    fail(ErrorKind::domain, "carrying capacity requires a positive leading coefficient");
  }
  return l0 * std::exp(log_denominator(g, t0) - std::log(g.eta));
}

double drift_rate(const GrowthParams& g, double t) noexcept { return g.poly.derivative(t) * decay_weight(g, t); }

double integrated_drift(const ModelParams& xi, double t0, double t) {
  require_ordered(t0, t, "integrated_drift");
  if (t == t0) return 0.0;
  return log_denominator(xi, t0) - log_denominator(xi, t) - 0.5 * xi.sigma2 * (t - t0);
}

double conditional_mean(const GrowthParams& g, double x0, double t0, double t) {
  if (!(x0 > 0.0)) fail(ErrorKind::domain, "conditional_mean: x0 must be positive");
  return curve(g, x0, t0, t);
}

double process_mean(const GrowthParams& g, const InitialDistribution& init, double t0, double t) {
  const auto m = log_moments(init);
  return curve(g, std::exp(m.mu1 + 0.5 * m.sigma1sq), t0, t);
}

double percentile(const ModelParams& xi, const InitialDistribution& init, double t0, double t, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::domain, "percentile: alpha must lie in (0,1)");
  require_ordered(t0, t, "percentile");
  const auto m = log_moments(init);
  const double elapsed = t - t0;
  const double spread = std::sqrt(m.sigma1sq + xi.sigma2 * elapsed);
  return std::exp(log_denominator(xi, t0) - log_denominator(xi, t) + m.mu1 - 0.5 * xi.sigma2 * elapsed +
                  normal_quantile(alpha) * spread);
}

double inflection_residual(const GrowthParams& g, double t) noexcept {
  const double p = g.poly.derivative(t);
  const double w = decay_weight(g, t);
  // (eta - e^{-Q}) / (eta + e^{-Q}) = 1 - 2w
  return g.poly.second_derivative(t) - p * p * (1.0 - 2.0 * w);
}

InflectionSet inflection_points(const GrowthParams& g, double l0, double t0, double t_max) {
  if (!(t_max > t0)) fail(ErrorKind::domain, "inflection_points: t_max must exceed t0");
  constexpr int kIntervals = 2000;
  constexpr double kWidth = 1e-12;
  constexpr double kTouchTol = 1e-10;

  const double step = (t_max - t0) / kIntervals;
  std::vector<double> ts(kIntervals + 1), rs(kIntervals + 1);
  for (int k = 0; k <= kIntervals; ++k) {
    ts[k] = (k == kIntervals) ? t_max : t0 + step * k;
    rs[k] = inflection_residual(g, ts[k]);
  }

  InflectionSet out;
  auto push_root = [&](double t) {
    if (t <= t0 || t >= t_max) return;
    if (!out.times.empty() && std::abs(out.times.back() - t) < 1e-9) return;
    out.times.push_back(t);
    out.values.push_back(curve(g, l0, t0, t));
  };

  for (int k = 0; k < kIntervals; ++k) {
    double lo = ts[k], hi = ts[k + 1];
    double rlo = rs[k], rhi = rs[k + 1];
    if (rlo == 0.0) {
      if (k > 0 && rs[k - 1] * rhi < 0.0) push_root(lo);
      continue;
    }
    if (rlo * rhi >= 0.0) continue;
    while (hi - lo > kWidth) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double rmid = inflection_residual(g, mid);
      if (rmid == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((rmid < 0.0) == (rlo < 0.0)) {
        lo = mid;
        rlo = rmid;
      } else {
        hi = mid;
      }
    }
    push_root(0.5 * (lo + hi));
  }

  // Near-zero local minima of |r| without a sign change.
  for (int k = 1; k < kIntervals; ++k) {
    const double a = rs[k - 1], b = rs[k], c = rs[k + 1];
    if (a * b <= 0.0 || b * c <= 0.0) continue;
    if (std::abs(b) > std::abs(a) || std::abs(b) > std::abs(c)) continue;
    double lo = ts[k - 1], hi = ts[k + 1];
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && hi - lo > kWidth; ++it) {
      const double x1 = hi - inv_phi * (hi - lo);
      const double x2 = lo + inv_phi * (hi - lo);
      if (std::abs(inflection_residual(g, x1)) < std::abs(inflection_residual(g, x2))) {
        hi = x2;
      } else {
        lo = x1;
      }
    }
    const double t = 0.5 * (lo + hi);
    if (std::abs(inflection_residual(g, t)) < kTouchTol) out.excluded.push_back(t);
  }
  return out;
}

}  // namespace msl

#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's numerics except to build inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "msl/model.hpp"
#include "msl/simulate.hpp"

namespace msl::test {

/// Adaptive Gauss-Kronrod (61 points, up to 15 bisections).
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-14) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

/// Central difference with Richardson extrapolation on h and h/2.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
  return (4.0 * d(h / 2.0) - d(h)) / 3.0;
}

/// Gradient of f at x, step proportional to |x_k|.
inline Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                double rel = 1e-4) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel * std::max(std::abs(x[k]), 1e-8);
    g[k] = derivative(
        [&](double s) {
          Eigen::VectorXd y = x;
          y[k] = s;
          return f(y);
        },
        x[k], h);
  }
  return g;
}

/// Asymptotic Kolmogorov tail P(sqrt(n) D > x).
inline double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

/// One-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

/// Stephens' finite-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d);
}

inline double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

inline ModelParams make_params(double eta, std::vector<double> beta, double sigma2) {
  return ModelParams{{eta, PolyCoeffs(std::move(beta))}, sigma2};
}

/// Non-monotone cubic growth: eta = e^-1, beta = (0.1, -0.009, 0.0002), sigma = 0.01.
inline ModelParams cubic_truth() { return make_params(std::exp(-1.0), {0.1, -0.009, 0.0002}, 1e-4); }

inline SimSpec cubic_spec(std::uint64_t seed, std::size_t paths = 200) {
  return SimSpec{cubic_truth(), DegenerateStart{5.0}, uniform_grid(0.0, 50.0, 500), paths, seed};
}

/// log(eta + exp(-Q(t))) written out directly.
inline double log_den(const GrowthParams& g, double t) {
  double q = 0.0;
  for (std::size_t i = g.poly.degree(); i >= 1; --i) q = (q + g.poly.beta(i)) * t;
  return std::log(g.eta + std::exp(-q));
}

/// Monte-Carlo first-passage times of X through S > x0: log X is simulated
/// exactly on a grid of step dt and crossings between grid points are caught
/// with the Brownian-bridge probability. Non-crossers get +inf.
inline std::vector<double> mc_passage_times(const ModelParams& xi, double x0, double t0, double s, double t_max,
                                            double dt, std::size_t paths, std::uint64_t seed) {
  const std::size_t steps = static_cast<std::size_t>(std::ceil((t_max - t0) / dt));
  std::vector<double> b(steps + 1);
  const double l0 = log_den(xi, t0);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = t0 + k * dt;
    b[k] = std::log(s / x0) - (l0 - log_den(xi, t) - 0.5 * xi.sigma2 * (t - t0));
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  const double sd = std::sqrt(xi.sigma2 * dt);
  std::vector<double> out(paths, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < paths; ++i) {
    double z = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
      const double zn = z + sd * nd(gen);
      const double a = b[k - 1] - z, c = b[k] - zn;
      if (c <= 0.0) {
        out[i] = t0 + (k - 1 + a / (a - c)) * dt;
        break;
      }
      if (ud(gen) < std::exp(-2.0 * a * c / (xi.sigma2 * dt))) {
        out[i] = t0 + (k - 0.5) * dt;
        break;
      }
      z = zn;
    }
  }
  return out;
}

}  // namespace msl::test

#include "msl/fpt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

void FptProblem::validate() const {
  params.validate();
  if (!(x0 > 0.0) || !(boundary > 0.0)) fail(ErrorKind::domain, "FPT start and boundary must be positive");
  if (boundary == x0) fail(ErrorKind::domain, "FPT boundary must differ from the start");
  if (!(t_max > t0)) fail(ErrorKind::domain, "FPT horizon must exceed t0");
}

double fptl(const FptProblem& problem, double t) {
  problem.validate();
  if (!(t > problem.t0)) fail(ErrorKind::domain, "fptl: requires t > t0");
  const double c = (std::log(problem.boundary) - std::log(problem.x0) - integrated_drift(problem.params, problem.t0, t)) /
                   std::sqrt(problem.params.sigma2 * (t - problem.t0));
  return problem.upward() ? normal_cdf(-c) : normal_cdf(c);
}

FptlCurve fptl_curve(const FptProblem& problem, std::size_t points, double rise) {
  problem.validate();
  if (points < 3) fail(ErrorKind::validation, "fptl_curve: needs at least three points");
  FptlCurve out;
  out.times.resize(points);
  out.values.resize(points);
  const double h = (problem.t_max - problem.t0) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    out.times[k] = k + 1 == points ? problem.t_max : problem.t0 + h * static_cast<double>(k);
    out.values[k] = k == 0 ? 0.0 : fptl(problem, out.times[k]);
  }
  bool open = false;
  for (std::size_t k = 1; k < points; ++k) {
    const bool up = out.values[k] - out.values[k - 1] > rise;
    if (up && !open) {
      out.growth.push_back({out.times[k - 1], out.times[k]});
      open = true;
    } else if (up) {
      out.growth.back().hi = out.times[k];
    } else {
      open = false;
    }
  }
  return out;
}

std::vector<double> adaptive_steps(const FptlCurve& curve, double t0, double t_max, const StepPolicy& policy) {
  if (!(t_max > t0)) fail(ErrorKind::validation, "adaptive_steps: empty range");
  if (!(policy.fine_divisor > 0.0) || !(policy.coarse_factor >= 1.0) || !(policy.refinement > 0.0)) {
    fail(ErrorKind::validation, "adaptive_steps: invalid step policy");
  }
  std::vector<TimeInterval> growth;
  for (const auto& g : curve.growth) {
    const double lo = std::max(g.lo, t0);
    const double hi = std::min(g.hi, t_max);
    if (hi > lo) growth.push_back({lo, hi});
  }
  double coarse = (t_max - t0) / policy.fine_divisor;
  std::vector<double> fine(growth.size());
  for (std::size_t k = 0; k < growth.size(); ++k) {
    fine[k] = (growth[k].hi - growth[k].lo) / policy.fine_divisor / policy.refinement;
    coarse = k == 0 ? policy.coarse_factor * fine[k] : std::min(coarse, policy.coarse_factor * fine[k]);
  }
  if (growth.empty()) coarse /= policy.refinement;

  std::vector<double> nodes{t0};
  double t = t0;
  std::size_t next = 0;
  while (t < t_max) {
    while (next < growth.size() && growth[next].hi <= t) ++next;
    const bool inside = next < growth.size() && t >= growth[next].lo;
    if (inside) {
      // Place the interval's nodes exactly, so its endpoints are grid nodes.
      const auto& g = growth[next];
      const auto steps = static_cast<std::size_t>(std::ceil((g.hi - t) / fine[next] - 1e-9));
      const double h = (g.hi - t) / static_cast<double>(std::max<std::size_t>(steps, 1));
      const double start = t;
      for (std::size_t s = 1; s <= steps; ++s) nodes.push_back(s == steps ? g.hi : start + h * static_cast<double>(s));
      t = g.hi;
      ++next;
      continue;
    }
    const double stop = next < growth.size() ? growth[next].lo : t_max;
    const auto steps = static_cast<std::size_t>(std::ceil((stop - t) / coarse - 1e-9));
    const double h = (stop - t) / static_cast<double>(std::max<std::size_t>(steps, 1));
    const double start = t;
    for (std::size_t s = 1; s <= steps; ++s) nodes.push_back(s == steps ? stop : start + h * static_cast<double>(s));
    t = stop;
  }
  return nodes;
}

namespace {

// Boundary for the driftless process and its derivative.
struct Boundary {
  std::vector<double> b;
  std::vector<double> db;
};

Boundary boundary_on(const FptProblem& pb, const std::vector<double>& nodes) {
  Boundary out;
  out.b.resize(nodes.size());
  out.db.resize(nodes.size());
  const double base = std::log(pb.boundary / pb.x0);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    out.b[k] = base - integrated_drift(pb.params, pb.t0, nodes[k]);
    out.db[k] = -drift_rate(pb.params, nodes[k]) + 0.5 * pb.params.sigma2;
  }
  return out;
}

double quantile_from(const std::vector<double>& t, const std::vector<double>& cdf, double q) {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), q);
  if (it == cdf.begin()) return t.front();
  if (it == cdf.end()) return t.back();
  const std::size_t k = static_cast<std::size_t>(it - cdf.begin());
  const double span = cdf[k] - cdf[k - 1];
  const double frac = span > 0.0 ? (q - cdf[k - 1]) / span : 0.0;
  return t[k - 1] + frac * (t[k] - t[k - 1]);
}

}  // namespace

FptSummary summarize(const std::vector<double>& t, const std::vector<double>& g) {
  if (t.size() != g.size() || t.size() < 3) fail(ErrorKind::shape, "summarize: need matching series of length >= 3");
  KahanSum m0, m1, m2;
  std::vector<double> cdf(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double h = t[k] - t[k - 1];
    m0 += 0.5 * h * (g[k] + g[k - 1]);
    m1 += 0.5 * h * (t[k] * g[k] + t[k - 1] * g[k - 1]);
    m2 += 0.5 * h * (t[k] * t[k] * g[k] + t[k - 1] * t[k - 1] * g[k - 1]);
    cdf[k] = m0.value();
  }
  const double mass = m0.value();
  if (!(mass > 0.0)) fail(ErrorKind::numerical, "summarize: density has no mass");
  FptSummary s;
  s.mean = m1.value() / mass;
  s.sd = std::sqrt(std::max(m2.value() / mass - s.mean * s.mean, 0.0));
  for (auto& c : cdf) c /= mass;
  s.decile1 = quantile_from(t, cdf, 0.1);
  s.decile5 = quantile_from(t, cdf, 0.5);
  s.decile9 = quantile_from(t, cdf, 0.9);

  const auto k = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
  s.mode = t[k];
  if (k > 0 && k + 1 < t.size()) {
    // Vertex of the parabola through the three nodes around the maximum.
    const double x0 = t[k - 1], x1 = t[k], x2 = t[k + 1];
    const double y0 = g[k - 1], y1 = g[k], y2 = g[k + 1];
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double a = (d12 - d01) / (x2 - x0);
    if (a < 0.0) {
      const double vertex = 0.5 * (x0 + x1) - d01 / (2.0 * a);
      s.mode = std::clamp(vertex, x0, x2);
    }
  }
  return s;
}

FptDensity solve_density(const FptProblem& problem, const std::vector<double>& nodes) {
  problem.validate();
  if (nodes.size() < 3 || nodes.front() != problem.t0) {
    fail(ErrorKind::validation, "solve_density: nodes must start at t0 and have at least three points");
  }
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    if (!(nodes[k] > nodes[k - 1])) fail(ErrorKind::validation, "solve_density: nodes must increase");
  }
  const std::size_t kn = nodes.size();
  const auto bd = boundary_on(problem, nodes);
  const double s2 = problem.params.sigma2;
  const double sign = problem.upward() ? 1.0 : -1.0;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);

  auto psi = [&](std::size_t k, double y, double tau) {
    const double dt = nodes[k] - tau;
    const double gap = bd.b[k] - y;
    const double f = norm / std::sqrt(dt) * std::exp(-gap * gap / (2.0 * s2 * dt));
    return 0.5 * (bd.db[k] - gap / dt) * f;
  };

  FptDensity out;
  out.times = nodes;
  out.density.assign(kn, 0.0);
  auto& g = out.density;
  for (std::size_t k = 1; k < kn; ++k) {
    KahanSum acc;
    acc += -2.0 * psi(k, 0.0, problem.t0);
    // Trapezoid in tau: g(t0) = 0 and psi vanishes as tau -> t, so only interior nodes contribute.
    for (std::size_t j = 1; j < k; ++j) {
      const double w = 0.5 * (nodes[j + 1] - nodes[j - 1]);
      acc += 2.0 * w * g[j] * psi(k, bd.b[j], nodes[j]);
    }
    g[k] = sign * acc.value();
  }

  out.cumulative.assign(kn, 0.0);
  KahanSum mass;
  for (std::size_t k = 1; k < kn; ++k) {
    mass += 0.5 * (nodes[k] - nodes[k - 1]) * (g[k] + g[k - 1]);
    out.cumulative[k] = mass.value();
  }
  out.captured_mass = mass.value();
  out.min_density = *std::min_element(g.begin(), g.end());
  out.negative_density = out.min_density < -1e-9;
  out.short_horizon = out.captured_mass < 0.95;
  if (out.captured_mass > 0.0) out.summary = summarize(nodes, g);
  return out;
}

FptDensity solve_density(const FptProblem& problem, const StepPolicy& policy) {
  const auto curve = fptl_curve(problem);
  return solve_density(problem, adaptive_steps(curve, problem.t0, problem.t_max, policy));
}

std::optional<double> crossing_time_deterministic(const GrowthParams& g, double l0, double t0, double boundary) {
  g.validate();
  if (!(l0 > 0.0) || !(boundary > 0.0)) fail(ErrorKind::domain, "crossing_time_deterministic: levels must be positive");
  if (boundary == l0) return t0;
  const bool up = boundary > l0;
  if (g.poly.leading_positive()) {
    const double cap = carrying_capacity(g, l0, t0);
    if (up && boundary >= cap) return std::nullopt;
  }
  auto above = [&](double t) { return up ? curve(g, l0, t0, t) >= boundary : curve(g, l0, t0, t) <= boundary; };

  // Grow the search window until the level is reached, then scan it for the first crossing.
  double span = 1.0;
  int doublings = 0;
  while (!above(t0 + span)) {
    if (++doublings > 40) return std::nullopt;
    span *= 2.0;
  }
  constexpr int kScan = 4096;
  double lo = t0, hi = t0 + span;
  for (int k = 1; k <= kScan; ++k) {
    const double t = t0 + span * k / kScan;
    if (above(t)) {
      hi = t;
      lo = t0 + span * (k - 1) / kScan;
      break;
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (above(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace msl

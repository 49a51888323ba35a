#include "msl/fit_nr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "msl/error.hpp"
#include "msl/numeric.hpp"
#include "msl/regression.hpp"

namespace msl {

namespace {

InitSolution finish_init(const LsqFit& fit, double eta, std::size_t p, bool intercept, std::size_t used,
                         const PathPanel& panel) {
  InitSolution out;
  std::vector<double> beta(p);
  for (std::size_t k = 0; k < p; ++k) beta[k] = fit.coef(static_cast<long>(k) + (intercept ? 1 : 0));
  out.eta0 = eta;
  out.beta0 = PolyCoeffs(std::move(beta));
  out.r_squared = fit.r_squared;
  out.residuals = fit.residuals;
  out.points_used = used;
  out.sigma2_0 = panel.size() >= 2 ? initial_sigma2(panel) : 1e-4;
  return out;
}

}  // namespace

RatioPoints ratio_points(const PathPanel& panel, double z) {
  const auto& t = panel.common_grid();
  const auto m = sample_mean(panel);
  const std::size_t big_n = t.size();
  const double d = static_cast<double>(panel.size());
  std::vector<double> cv(big_n, 0.0);  // coefficient of variation of m_j
  if (panel.size() > 1) {
    for (std::size_t j = 0; j < big_n; ++j) {
      KahanSum ss;
      for (const auto& p : panel.paths()) ss += (p.values[j] - m[j]) * (p.values[j] - m[j]);
      cv[j] = std::sqrt(ss.value() / (d - 1.0) / d) / m[j];
    }
  }
  RatioPoints out;
  out.first_ratio = m.back() / m.front() - 1.0;
  for (std::size_t j = 0; j + 1 < big_n; ++j) {
    const double q = m.back() / m[j];
    const double se = q * std::hypot(cv[j], cv.back());
    if (q - 1.0 > 0.0 && q - 1.0 > z * se) {
      out.t.push_back(t[j]);
      out.ratio.push_back(q - 1.0);
    }
  }
  return out;
}

InitSolution initial_theta(const PathPanel& panel, std::size_t p) {
  if (p < 1) fail(ErrorKind::validation, "degree must be at least 1");
  const auto pts = ratio_points(panel);
  if (pts.t.size() < p + 2) {
    fail(ErrorKind::numerical, "initial_theta: only " + std::to_string(pts.t.size()) +
                                   " usable points for a degree " + std::to_string(p) + " regression");
  }
  Eigen::VectorXd y(static_cast<long>(pts.t.size()));
  for (std::size_t j = 0; j < pts.t.size(); ++j) y(static_cast<long>(j)) = -std::log(pts.ratio[j]);
  const auto fit = least_squares(poly_design(pts.t, p, true), y);
  return finish_init(fit, std::exp(fit.coef(0)), p, true, pts.t.size(), panel);
}

InitSolution initial_theta_ratio(const PathPanel& panel, std::size_t p) {
  if (p < 1) fail(ErrorKind::validation, "degree must be at least 1");
  const auto pts = ratio_points(panel);
  if (!(pts.first_ratio > 0.0)) {
    fail(ErrorKind::numerical, "initial_theta_ratio: last sample mean does not exceed the first");
  }
  if (pts.t.size() < p + 1) fail(ErrorKind::numerical, "initial_theta_ratio: too few usable points");
  const double eta = 1.0 / pts.first_ratio;
  Eigen::VectorXd y(static_cast<long>(pts.t.size()));
  for (std::size_t j = 0; j < pts.t.size(); ++j) y(static_cast<long>(j)) = -std::log(pts.ratio[j] * eta);
  const auto fit = least_squares(poly_design(pts.t, p, false), y);
  return finish_init(fit, eta, p, false, pts.t.size(), panel);
}

double initial_sigma2(const PathPanel& panel) {
  if (panel.size() < 2) fail(ErrorKind::validation, "initial_sigma2: needs at least two paths");
  const auto& t = panel.common_grid();
  const auto m = sample_mean(panel);
  const auto mg = geometric_mean(panel);
  const auto init = fit_initial(transform(panel));
  KahanSum sxy, sxx;
  for (std::size_t j = 1; j < t.size(); ++j) {
    const double x = t[j] - t.front();
    const double y = 2.0 * std::log(m[j] / mg[j]) - init.sigma1sq_hat;
    sxy += x * y;
    sxx += x * x;
  }
  return std::max(sxy.value() / sxx.value(), 1e-12);
}

double sigma2_root(double n, double z3, double sum_squares) {
  if (!(z3 > 0.0)) fail(ErrorKind::domain, "sigma2_root: Z3 must be positive");
  if (sum_squares < -1e-12) fail(ErrorKind::numerical, "sigma2_root: negative sum of squares");
  const double r = std::max(sum_squares, 0.0);
  // 2(-n + sqrt(n^2 + Z3 R)) / Z3 without the cancellation
  return 2.0 * r / (n + std::sqrt(n * n + z3 * r));
}

double sigma2_root(const LikelihoodStats& stats) {
  return sigma2_root(static_cast<double>(stats.n), stats.z3, stats.residual_ss);
}

namespace {

// The p + 2 equations, the magnitude of their terms and the Jacobian in
// (eta, beta, sigma^2).
struct SystemEval {
  Eigen::VectorXd f;
  Eigen::VectorXd scale;
  Eigen::MatrixXd jac;
  double residual_ss = 0.0;
};

SystemEval evaluate(const VData& vd, const GrowthParams& th, double s2, bool with_jac) {
  const long q = static_cast<long>(th.poly.degree()) + 1;
  const double n = static_cast<double>(vd.n);
  Eigen::VectorXd xs = Eigen::VectorXd::Zero(q), ys = Eigen::VectorXd::Zero(q), ws = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd fl = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd jtt = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd df0 = Eigen::VectorXd::Zero(q);
  KahanSum rss, a_sum, b_sum;
  for (const auto& gr : vd.groups) {
    const auto ga = detail::logden_derivs(th, gr.ta, with_jac);
    const auto gb = detail::logden_derivs(th, gr.tb, with_jac);
    const double lam = ga.g - gb.g;
    const double cnt = static_cast<double>(gr.count);
    const double rd = std::sqrt(gr.delta);
    const Eigen::VectorXd dl = ga.d1 - gb.d1;
    const double e = gr.mean_v - lam / rd;
    rss += gr.centered_ss;
    rss += cnt * e * e;
    a_sum += cnt * lam * lam / gr.delta;
    b_sum += std::abs(lam * gr.sum_v / rd);
    xs += (gr.sum_v / rd) * dl;
    ys += (-cnt * lam / gr.delta) * dl;
    ws += cnt * dl;
    // Residual of the group mean first, so the large X and Y sums never cancel.
    fl += (cnt * (e + 0.5 * s2 * rd) / rd) * dl;
    if (with_jac) {
      const double ak = gr.sum_v / rd - cnt * lam / gr.delta;
      jtt.noalias() += -cnt / gr.delta * dl * dl.transpose() + (ak + 0.5 * cnt * s2) * (ga.d2 - gb.d2);
      df0 += 2.0 * ak * dl;
    }
  }
  SystemEval out;
  out.residual_ss = rss.value();
  out.f.resize(q + 1);
  out.scale.resize(q + 1);
  out.f(0) = s2 * (n + 0.25 * s2 * vd.z3) - out.residual_ss;
  out.scale(0) = s2 * n + 0.25 * s2 * s2 * vd.z3 + vd.z1 + a_sum.value() + 2.0 * b_sum.value();
  for (long l = 0; l < q; ++l) {
    const double sgn = l == 0 ? 1.0 : -1.0;
    out.f(l + 1) = sgn * fl(l);
    out.scale(l + 1) = std::abs(ys(l)) + 0.5 * s2 * std::abs(ws(l)) + std::abs(xs(l));
  }
  if (with_jac) {
    // Unknowns ordered (eta, beta, sigma^2); equations (sigma^2 eq, l = 0..p).
    out.jac.setZero(q + 1, q + 1);
    out.jac.block(0, 0, 1, q) = df0.transpose();
    out.jac(0, q) = n + 0.5 * s2 * vd.z3;
    for (long l = 0; l < q; ++l) {
      const double sgn = l == 0 ? 1.0 : -1.0;
      out.jac.block(l + 1, 0, 1, q) = sgn * jtt.row(l);
      out.jac(l + 1, q) = sgn * 0.5 * ws(l);
    }
  }
  for (long k = 0; k <= q; ++k) {
    if (!(out.scale(k) > 0.0)) out.scale(k) = 1.0;
  }
  return out;
}

GrowthParams theta_of(const Eigen::VectorXd& x, long q) {
  std::vector<double> beta(x.data() + 1, x.data() + q);
  return GrowthParams{x(0), PolyCoeffs(std::move(beta))};
}

bool admissible(const Eigen::VectorXd& x) { return x.allFinite() && x(0) > 0.0; }

struct Problem {
  // residual, per-equation scale and Jacobian at x
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)> eval;
  std::function<bool(const Eigen::VectorXd&)> valid;
};

Eigen::VectorXd solve_scaled(const Eigen::MatrixXd& j, const Eigen::VectorXd& rhs, bool& ok) {
  const long m = j.cols();
  Eigen::VectorXd cs(m);
  for (long k = 0; k < m; ++k) {
    const double c = j.col(k).norm();
    cs(k) = c > 0.0 ? 1.0 / c : 1.0;
  }
  const Eigen::MatrixXd js = j * cs.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(js);
  ok = qr.rank() == m;
  Eigen::VectorXd step = cs.asDiagonal() * qr.solve(rhs);
  ok = ok && step.allFinite();
  return step;
}

struct NewtonOutcome {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  std::string reason;
};

// A few undamped steps past the tolerance, kept only while they help.
void polish(const Problem& pb, NewtonOutcome& out, std::vector<double>& trace) {
  Eigen::VectorXd f, sc;
  Eigen::MatrixXd jac;
  for (int k = 0; k < 3; ++k) {
    pb.eval(out.x, f, sc, &jac);
    bool ok = false;
    const Eigen::VectorXd xt = out.x + solve_scaled(jac, -f, ok);
    if (!ok || !pb.valid(xt)) return;
    Eigen::VectorXd ft, st;
    pb.eval(xt, ft, st, nullptr);
    const double s = ft.cwiseQuotient(st).lpNorm<Eigen::Infinity>();
    if (!(s < out.residual)) return;
    out.x = xt;
    out.residual = s;
    ++out.iterations;
    trace.push_back(s);
  }
}

NewtonOutcome newton(const Problem& pb, Eigen::VectorXd x, const NrOptions& opts, std::vector<double>& trace,
                     int iter_offset) {
  NewtonOutcome out;
  Eigen::VectorXd f, sc;
  Eigen::MatrixXd jac;
  int it = iter_offset;
  for (; it < opts.max_iter; ++it) {
    pb.eval(x, f, sc, &jac);
    const Eigen::VectorXd fs = f.cwiseQuotient(sc);
    const double sup = fs.lpNorm<Eigen::Infinity>();
    trace.push_back(sup);
    if (sup < opts.tol) {
      out = {x, it, true, sup, "residual"};
      polish(pb, out, trace);
      return out;
    }
    const double merit = fs.norm();
    bool ok = false;
    Eigen::VectorXd step = solve_scaled(jac, -f, ok);

    auto try_step = [&](const Eigen::VectorXd& dx, double& alpha) -> bool {
      alpha = 1.0;
      const int halvings = opts.damping ? 30 : 0;
      for (int h = 0; h <= halvings; ++h, alpha *= 0.5) {
        const Eigen::VectorXd xt = x + alpha * dx;
        if (!pb.valid(xt)) continue;
        Eigen::VectorXd ft, st;
        pb.eval(xt, ft, st, nullptr);
        if (!ft.allFinite()) continue;
        // Compare under the current scaling so successive merits are consistent.
        if (!opts.damping || ft.cwiseQuotient(sc).norm() < (1.0 - 1e-4 * alpha) * merit) return true;
      }
      return false;
    };

    double alpha = 0.0;
    bool accepted = ok && try_step(step, alpha);
    if (!accepted) {
      // Levenberg-style diagonal shift on the scaled normal equations.
      const Eigen::MatrixXd js = sc.cwiseInverse().asDiagonal() * jac;
      const Eigen::VectorXd rs = -fs;
      const Eigen::MatrixXd jtj = js.transpose() * js;
      for (double mu = 1e-6; mu <= 1e6 && !accepted; mu *= 10.0) {
        Eigen::MatrixXd a = jtj;
        a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-300);
        step = a.ldlt().solve(js.transpose() * rs);
        if (!step.allFinite()) continue;
        accepted = try_step(step, alpha);
      }
    }
    if (!accepted) {
      out = {x, it, false, sup, "stalled"};
      return out;
    }
    const Eigen::VectorXd dx = alpha * step;
    x += dx;
    const double rel = (dx.array().abs() / x.array().abs().max(1e-300)).maxCoeff();
    if (rel < 1e-12) {
      pb.eval(x, f, sc, nullptr);
      const double s = f.cwiseQuotient(sc).lpNorm<Eigen::Infinity>();
      trace.push_back(s);
      out = {x, it + 1, true, s, "step"};
      return out;
    }
  }
  pb.eval(x, f, sc, nullptr);
  out = {x, it, false, f.cwiseQuotient(sc).lpNorm<Eigen::Infinity>(), "max_iter"};
  return out;
}

}  // namespace

Eigen::VectorXd system_residual(const VData& vdata, const ModelParams& xi) {
  xi.validate();
  return evaluate(vdata, xi, xi.sigma2, false).f;
}

Eigen::VectorXd scaled_system_residual(const VData& vdata, const ModelParams& xi) {
  xi.validate();
  const auto e = evaluate(vdata, xi, xi.sigma2, false);
  return e.f.cwiseQuotient(e.scale);
}

NrResult fit(const VData& vdata, const GrowthParams& start, const NrOptions& opts) {
  start.validate();
  const long q = static_cast<long>(start.poly.degree()) + 1;
  const double n = static_cast<double>(vdata.n);
  auto root_at = [&](const GrowthParams&, double rss) { return sigma2_root(n, vdata.z3, rss); };

  // Reduced problem in theta with sigma^2 eliminated through its closed-form root.
  Problem reduced;
  reduced.valid = admissible;
  reduced.eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& f, Eigen::VectorXd& sc, Eigen::MatrixXd* jac) {
    const auto th = theta_of(x, q);
    const auto pre = evaluate(vdata, th, 0.0, false);
    const double s2 = root_at(th, pre.residual_ss);
    const auto e = evaluate(vdata, th, s2, jac != nullptr);
    f = e.f.tail(q);
    sc = e.scale.tail(q);
    if (jac) {
      // d sigma^2 / d theta from the implicit function theorem on the first equation
      const Eigen::RowVectorXd ds = -e.jac.block(0, 0, 1, q) / e.jac(0, q);
      *jac = e.jac.block(1, 0, q, q) + e.jac.block(1, q, q, 1) * ds;
    }
  };

  NrResult res;
  Eigen::VectorXd x(q);
  x(0) = start.eta;
  for (long k = 1; k < q; ++k) x(k) = start.poly.beta(static_cast<std::size_t>(k));
  auto out = newton(reduced, x, opts, res.trace, 0);

  if (!out.converged) {
    // Full system in (theta, sigma^2) from the best reduced iterate.
    Problem full;
    full.valid = [&](const Eigen::VectorXd& y) { return admissible(y) && y(q) > 0.0; };
    full.eval = [&](const Eigen::VectorXd& y, Eigen::VectorXd& f, Eigen::VectorXd& sc, Eigen::MatrixXd* jac) {
      const auto e = evaluate(vdata, theta_of(y, q), y(q), jac != nullptr);
      f = e.f;
      sc = e.scale;
      if (jac) *jac = e.jac;
    };
    Eigen::VectorXd y(q + 1);
    y.head(q) = out.x;
    const auto th = theta_of(out.x, q);
    y(q) = std::max(root_at(th, evaluate(vdata, th, 0.0, false).residual_ss), 1e-12);
    auto full_out = newton(full, y, opts, res.trace, out.iterations);
    if (full_out.converged || full_out.residual < out.residual) {
      out.x = full_out.x.head(q);
      out.iterations = full_out.iterations;
      out.converged = full_out.converged;
      out.residual = full_out.residual;
      out.reason = "full:" + full_out.reason;
    }
  }

  const auto th = theta_of(out.x, q);
  const double s2 = root_at(th, evaluate(vdata, th, 0.0, false).residual_ss);
  res.xi_hat = ModelParams{th, std::max(s2, std::numeric_limits<double>::min())};
  res.iterations = out.iterations;
  res.converged = out.converged;
  res.residual_norm = out.residual;
  res.stop_reason = out.reason;
  return res;
}

NrResult fit(const PathPanel& panel, std::size_t p, const NrOptions& opts) {
  const auto vd = transform(panel);
  if (opts.start) {
    auto r = fit(vd, *opts.start, opts);
    r.start_used = "given";
    return r;
  }
  NrResult best;
  bool have = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    InitSolution init;
    try {
      init = attempt == 0 ? initial_theta(panel, p) : initial_theta_ratio(panel, p);
    } catch (const Error&) {
      continue;
    }
    auto r = fit(vd, GrowthParams{init.eta0, init.beta0}, opts);
    r.start_used = attempt == 0 ? "regression" : "ratio";
    if (r.converged) return r;
    if (!have || r.residual_norm < best.residual_norm) {
      best = std::move(r);
      have = true;
    }
  }
  if (!have) fail(ErrorKind::numerical, "fit: no usable initial solution");
  return best;
}

}  // namespace msl

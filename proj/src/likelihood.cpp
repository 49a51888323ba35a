#include "msl/likelihood.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

VData transform(const PathPanel& panel) {
  VData out;
  const std::size_t d = panel.size();
  out.v0.resize(d);
  out.v1.resize(d);
  out.deltas.resize(d);
  out.times.resize(d);

  std::map<std::pair<double, double>, std::size_t> index;
  std::vector<KahanSum> sums;
  KahanSum z1, z2, z3;
  for (std::size_t i = 0; i < d; ++i) {
    const auto& p = panel[i];
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      if (!(p.values[j] > 0.0)) {
        fail(ErrorKind::domain,
             "nonpositive value in path " + std::to_string(i) + " at index " + std::to_string(j));
      }
    }
    out.v0[i] = p.values.front();
    out.times[i] = p.times;
    const std::size_t m = p.values.size() - 1;
    out.v1[i].resize(m);
    out.deltas[i].resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double dt = p.times[j + 1] - p.times[j];
      const double v = std::log(p.values[j + 1] / p.values[j]) / std::sqrt(dt);
      out.deltas[i][j] = dt;
      out.v1[i][j] = v;
      z1 += v * v;
      z2 += v * std::sqrt(dt);
      z3 += dt;
      auto [it, fresh] = index.try_emplace({p.times[j], p.times[j + 1]}, out.groups.size());
      if (fresh) {
        out.groups.push_back({p.times[j], p.times[j + 1], dt, 0, 0.0, 0.0, 0.0});
        sums.emplace_back();
      }
      auto& g = out.groups[it->second];
      ++g.count;
      sums[it->second] += v;
    }
    out.n += m;
  }
  for (std::size_t k = 0; k < out.groups.size(); ++k) {
    out.groups[k].sum_v = sums[k].value();
    out.groups[k].mean_v = out.groups[k].sum_v / static_cast<double>(out.groups[k].count);
  }
  std::vector<KahanSum> ss(out.groups.size());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < out.v1[i].size(); ++j) {
      const std::size_t k = index.at({out.times[i][j], out.times[i][j + 1]});
      const double e = out.v1[i][j] - out.groups[k].mean_v;
      ss[k] += e * e;
    }
  }
  for (std::size_t k = 0; k < out.groups.size(); ++k) out.groups[k].centered_ss = ss[k].value();

  // Order groups by time so that results do not depend on path order.
  std::vector<TransitionGroup> ordered;
  ordered.reserve(out.groups.size());
  for (const auto& [key, k] : index) ordered.push_back(out.groups[k]);
  out.groups = std::move(ordered);

  out.z1 = z1.value();
  out.z2 = z2.value();
  out.z3 = z3.value();
  return out;
}

PathPanel reconstruct(const VData& vdata) {
  std::vector<Path> paths(vdata.d());
  for (std::size_t i = 0; i < vdata.d(); ++i) {
    auto& p = paths[i];
    p.times = vdata.times[i];
    p.values.resize(p.times.size());
    p.values[0] = vdata.v0[i];
    for (std::size_t j = 0; j < vdata.v1[i].size(); ++j) {
      p.values[j + 1] = p.values[j] * std::exp(vdata.v1[i][j] * std::sqrt(vdata.deltas[i][j]));
    }
  }
  return PathPanel(std::move(paths));
}

InitialFit fit_initial(const VData& vdata) {
  const std::size_t d = vdata.d();
  if (d == 0) fail(ErrorKind::validation, "fit_initial: empty panel");
  KahanSum s;
  for (double v : vdata.v0) s += std::log(v);
  InitialFit out;
  out.mu1_hat = s.value() / static_cast<double>(d);
  if (d == 1) return out;
  KahanSum q;
  for (double v : vdata.v0) {
    const double e = std::log(v) - out.mu1_hat;
    q += e * e;
  }
  out.sigma1sq_hat = q.value() / static_cast<double>(d);
  return out;
}

bool degenerate_start(const VData& vdata) {
  for (double v : vdata.v0) {
    if (v != vdata.v0.front()) return false;
  }
  return true;
}

double transition_log_mean(const ModelParams& xi, double ta, double tb) {
  if (!(tb > ta)) fail(ErrorKind::domain, "transition_log_mean: requires tb > ta");
  return integrated_drift(xi, ta, tb);
}

namespace detail {

LogDenDerivs logden_derivs(const GrowthParams& th, double t, bool second) {
  const std::size_t p = th.poly.degree();
  const long q = static_cast<long>(p) + 1;
  LogDenDerivs out;
  out.g = log_denominator(th, t);
  const double wd = std::exp(-out.g);        // 1 / (eta + E)
  const double u = decay_weight(th, t);      // E / (eta + E)
  Eigen::VectorXd pw(q);
  pw(0) = 1.0;
  for (long k = 1; k < q; ++k) pw(k) = pw(k - 1) * t;
  out.d1.resize(q);
  out.d1(0) = wd;
  for (long k = 1; k < q; ++k) out.d1(k) = -pw(k) * u;
  if (second) {
    out.d2.resize(q, q);
    out.d2(0, 0) = -wd * wd;
    for (long k = 1; k < q; ++k) {
      out.d2(0, k) = out.d2(k, 0) = pw(k) * u * wd;
      for (long l = k; l < q; ++l) out.d2(k, l) = out.d2(l, k) = pw(k) * pw(l) * u * (1.0 - u);
    }
  }
  return out;
}

}  // namespace detail

using detail::logden_derivs;

LikelihoodStats compute_stats(const VData& vdata, const GrowthParams& theta) {
  theta.validate();
  const long q = static_cast<long>(theta.poly.degree()) + 1;
  const std::size_t ng = vdata.groups.size();
  LikelihoodStats s;
  s.z1 = vdata.z1;
  s.z2 = vdata.z2;
  s.z3 = vdata.z3;
  s.n = vdata.n;
  s.lambda.resize(ng);
  s.lD.resize(static_cast<long>(ng), q);
  s.dm.resize(static_cast<long>(ng), q);

  KahanSum a, b, c, rss;
  std::vector<KahanSum> w(q), x(q), y(q);
  for (std::size_t k = 0; k < ng; ++k) {
    const auto& gr = vdata.groups[k];
    const auto ga = logden_derivs(theta, gr.ta, false);
    const auto gb = logden_derivs(theta, gr.tb, false);
    const double lam = ga.g - gb.g;
    const double cnt = static_cast<double>(gr.count);
    const double rd = std::sqrt(gr.delta);
    s.lambda[k] = lam;
    a += cnt * lam * lam / gr.delta;
    b += lam * gr.sum_v / rd;
    c += cnt * lam;
    const double e = gr.mean_v - lam / rd;
    rss += gr.centered_ss;
    rss += cnt * e * e;
    const long r = static_cast<long>(k);
    for (long l = 0; l < q; ++l) {
      const double dm = ga.d1(l) - gb.d1(l);
      // lD keeps the eta column as is and flips the beta columns.
      const double ld = (l == 0) ? dm : -dm;
      s.dm(r, l) = dm;
      s.lD(r, l) = ld;
      w[l] += cnt * ld;
      x[l] += gr.sum_v / rd * ld;
      y[l] += -cnt * lam / gr.delta * ld;
    }
  }
  s.a = a.value();
  s.b = b.value();
  s.c = c.value();
  s.residual_ss = rss.value();
  s.w.resize(q);
  s.x.resize(q);
  s.y.resize(q);
  for (long l = 0; l < q; ++l) {
    s.w(l) = w[l].value();
    s.x(l) = x[l].value();
    s.y(l) = y[l].value();
  }
  return s;
}

double loglik_tilde(const VData& vdata, const ModelParams& xi) {
  xi.validate();
  KahanSum rss;
  for (const auto& gr : vdata.groups) {
    const double m = log_denominator(xi, gr.ta) - log_denominator(xi, gr.tb) - 0.5 * xi.sigma2 * gr.delta;
    const double e = gr.mean_v - m / std::sqrt(gr.delta);
    rss += gr.centered_ss;
    rss += static_cast<double>(gr.count) * e * e;
  }
  return -0.5 * static_cast<double>(vdata.n) * std::log(xi.sigma2) - rss.value() / (2.0 * xi.sigma2);
}

double loglik(const VData& vdata, const InitialFit& alpha, const ModelParams& xi) {
  if (!(alpha.sigma1sq_hat > 0.0)) fail(ErrorKind::domain, "loglik: initial variance must be positive");
  const double n = static_cast<double>(vdata.n);
  const double d = static_cast<double>(vdata.d());
  KahanSum lv, q;
  for (double v : vdata.v0) {
    const double l = std::log(v);
    lv += l;
    q += (l - alpha.mu1_hat) * (l - alpha.mu1_hat);
  }
  return loglik_tilde(vdata, xi) - 0.5 * (n + d) * std::log(2.0 * std::numbers::pi) -
         0.5 * d * std::log(alpha.sigma1sq_hat) - lv.value() - q.value() / (2.0 * alpha.sigma1sq_hat);
}

double loglik(const VData& vdata, const ModelParams& xi) {
  return loglik_tilde(vdata, xi) - 0.5 * static_cast<double>(vdata.n) * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd grad_loglik(const LikelihoodStats& s, double sigma2) {
  if (!(sigma2 > 0.0)) fail(ErrorKind::domain, "grad_loglik: sigma2 must be positive");
  const long q = s.w.size();
  Eigen::VectorXd g(q + 1);
  for (long l = 0; l < q; ++l) {
    const double f = s.y(l) + 0.5 * sigma2 * s.w(l) + s.x(l);
    g(l) = (l == 0 ? f : -f) / sigma2;
  }
  const double n = static_cast<double>(s.n);
  const double f0 = sigma2 * (n + 0.25 * sigma2 * s.z3) - s.residual_ss;
  g(q) = -f0 / (2.0 * sigma2 * sigma2);
  return g;
}

Eigen::VectorXd grad_loglik(const VData& vdata, const ModelParams& xi) {
  xi.validate();
  const long q = static_cast<long>(xi.poly.degree()) + 1;
  const double s2 = xi.sigma2;
  std::vector<KahanSum> acc(q);
  KahanSum r0;
  for (const auto& gr : vdata.groups) {
    const auto ga = logden_derivs(xi, gr.ta, false);
    const auto gb = logden_derivs(xi, gr.tb, false);
    const double lam = ga.g - gb.g;
    const double cnt = static_cast<double>(gr.count);
    const double rd = std::sqrt(gr.delta);
    const double e = gr.mean_v - lam / rd;
    r0 += gr.centered_ss;
    r0 += cnt * e * e;
    // sum over the group of (v - m/sqrt(Delta)) / sqrt(Delta)
    const double c1 = cnt * (e + 0.5 * s2 * rd) / rd;
    for (long l = 0; l < q; ++l) acc[l] += c1 * (ga.d1(l) - gb.d1(l));
  }
  Eigen::VectorXd g(q + 1);
  for (long l = 0; l < q; ++l) g(l) = acc[l].value() / s2;
  const double f0 = s2 * (static_cast<double>(vdata.n) + 0.25 * s2 * vdata.z3) - r0.value();
  g(q) = -f0 / (2.0 * s2 * s2);
  return g;
}

Eigen::MatrixXd hessian_loglik(const VData& vdata, const ModelParams& xi) {
  xi.validate();
  const long q = static_cast<long>(xi.poly.degree()) + 1;
  const double s2 = xi.sigma2;
  Eigen::MatrixXd htt = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd half_dm = Eigen::VectorXd::Zero(q);
  KahanSum rss, k_sum;
  for (const auto& gr : vdata.groups) {
    const auto ga = logden_derivs(xi, gr.ta, true);
    const auto gb = logden_derivs(xi, gr.tb, true);
    const double lam = ga.g - gb.g;
    const double cnt = static_cast<double>(gr.count);
    const double rd = std::sqrt(gr.delta);
    const Eigen::VectorXd dl = ga.d1 - gb.d1;
    // sum over the group of (v/sqrt(Delta) - m/Delta)
    const double c1 = gr.sum_v / rd - cnt * (lam / gr.delta - 0.5 * s2);
    htt.noalias() += -cnt / gr.delta * dl * dl.transpose() + c1 * (ga.d2 - gb.d2);
    score += c1 * dl;
    half_dm += 0.5 * cnt * dl;
    const double e = gr.mean_v - (lam - 0.5 * s2 * gr.delta) / rd;
    rss += gr.centered_ss;
    rss += cnt * e * e;
    k_sum += (gr.sum_v - cnt * lam / rd) * rd;
  }
  const double n = static_cast<double>(vdata.n);
  Eigen::MatrixXd h(q + 1, q + 1);
  h.topLeftCorner(q, q) = htt / s2;
  const Eigen::VectorXd cross = -score / (s2 * s2) + half_dm / s2;
  h.block(0, q, q, 1) = cross;
  h.block(q, 0, 1, q) = cross.transpose();
  // S(s2) = sum r^2 = R0 + s2 K + s2^2 Z3 / 4
  const double sv = rss.value();
  const double sd1 = k_sum.value() + 0.5 * s2 * vdata.z3;
  const double sd2 = 0.5 * vdata.z3;
  h(q, q) = 0.5 * n / (s2 * s2) - sd2 / (2.0 * s2) + sd1 / (s2 * s2) - sv / (s2 * s2 * s2);
  return h;
}

Eigen::VectorXd pack(const ModelParams& xi) {
  const auto beta = xi.poly.coefficients();
  Eigen::VectorXd v(static_cast<long>(beta.size()) + 2);
  v(0) = xi.eta;
  for (std::size_t i = 0; i < beta.size(); ++i) v(static_cast<long>(i) + 1) = beta[i];
  v(v.size() - 1) = xi.sigma2;
  return v;
}

ModelParams unpack(const Eigen::VectorXd& v) {
  if (v.size() < 3) fail(ErrorKind::shape, "parameter vector needs at least eta, beta_1 and sigma2");
  std::vector<double> beta(v.data() + 1, v.data() + v.size() - 1);
  return ModelParams{{v(0), PolyCoeffs(std::move(beta))}, v(v.size() - 1)};
}

}  // namespace msl

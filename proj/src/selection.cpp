#include "msl/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

double rae(std::span<const double> sample_mean, std::span<const double> fitted_mean) {
  if (sample_mean.size() != fitted_mean.size()) fail(ErrorKind::shape, "rae: series lengths differ");
  if (sample_mean.empty()) fail(ErrorKind::shape, "rae: empty series");
  KahanSum s;
  for (std::size_t i = 0; i < sample_mean.size(); ++i) {
    if (!(sample_mean[i] > 0.0)) fail(ErrorKind::domain, "rae: sample mean must be positive");
    s += std::abs(sample_mean[i] - fitted_mean[i]) / sample_mean[i];
  }
  return s.value() / static_cast<double>(sample_mean.size());
}

InfoCriteria aic_bic(std::size_t p, double loglik_value, double n) {
  if (!(n >= 1.0)) fail(ErrorKind::validation, "aic_bic: n must be at least 1");
  const double k = static_cast<double>(p + 2);
  return {2.0 * k - 2.0 * loglik_value, k * std::log(n) - 2.0 * loglik_value};
}

double kl_divergence(const LognormalLaw& c, const LognormalLaw& s) {
  if (!(c.var > 0.0) || !(s.var > 0.0)) fail(ErrorKind::domain, "kl_divergence: variances must be positive");
  const double dm = c.mu - s.mu;
  return 0.5 * (std::log(s.var / c.var) + (c.var + dm * dm) / s.var - 1.0);
}

double resistor_average(const LognormalLaw& c, const LognormalLaw& s) {
  const double a = kl_divergence(c, s);
  const double b = kl_divergence(s, c);
  if (a + b <= 0.0) return 0.0;
  return a * b / (a + b);
}

LognormalLaw sample_law(double mean, double geometric_mean) {
  if (!(mean > 0.0) || !(geometric_mean > 0.0)) fail(ErrorKind::domain, "sample_law: means must be positive");
  return {std::log(geometric_mean), std::max(2.0 * std::log(mean / geometric_mean), 1e-12)};
}

LognormalLaw fitted_law(const ModelParams& xi, const LognormalStart& start, double t0, double t) {
  return {start.mu1 + integrated_drift(xi, t0, t), start.sigma1sq + xi.sigma2 * (t - t0)};
}

LognormalStart estimated_start(const VData& vdata) {
  const auto a = fit_initial(vdata);
  if (degenerate_start(vdata)) return {std::log(vdata.v0.front()), 0.0};
  return {a.mu1_hat, a.sigma1sq_hat};
}

double fitted_loglik(const VData& vdata, const ModelParams& xi) {
  const auto a = fit_initial(vdata);
  if (degenerate_start(vdata) || !(a.sigma1sq_hat > 0.0)) return loglik(vdata, xi);
  return loglik(vdata, a, xi);
}

std::vector<double> fitted_mean(const PathPanel& panel, const ModelParams& xi) {
  const auto& t = panel.common_grid();
  const auto start = estimated_start(transform(panel));
  std::vector<double> out(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) out[j] = process_mean(xi, start, t.front(), t[j]);
  return out;
}

std::size_t choose_degree(const std::vector<DegreeFit>& fits, double tie) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : fits) {
    if (f.ok) best = std::min(best, f.bic);
  }
  if (!std::isfinite(best)) fail(ErrorKind::numerical, "choose_degree: no successful fit");
  std::size_t chosen = std::numeric_limits<std::size_t>::max();
  for (const auto& f : fits) {
    if (f.ok && f.bic <= best + tie) chosen = std::min(chosen, f.p);
  }
  return chosen;
}

GoodnessReport select_degree(const PathPanel& panel, const std::vector<std::size_t>& p_range, const Fitter& fitter,
                             const ReferenceLaw& reference) {
  if (p_range.empty()) fail(ErrorKind::validation, "select_degree: empty degree range");
  const auto vd = transform(panel);
  const auto& t = panel.common_grid();
  const auto m = sample_mean(panel);
  const auto mg = geometric_mean(panel);
  const auto start = estimated_start(vd);

  GoodnessReport rep;
  for (std::size_t j = 1; j < t.size(); ++j) rep.dra_times.push_back(t[j]);
  rep.degrees.resize(p_range.size());
  parallel_for(p_range.size(), [&](std::size_t k) {
    auto& f = rep.degrees[k];
    f.p = p_range[k];
    try {
      f.xi = fitter(panel, f.p);
      f.loglik = fitted_loglik(vd, f.xi);
      const auto ic = aic_bic(f.p, f.loglik, static_cast<double>(vd.n));
      f.aic = ic.aic;
      f.bic = ic.bic;
      std::vector<double> fm(t.size());
      for (std::size_t j = 0; j < t.size(); ++j) fm[j] = process_mean(f.xi, start, t.front(), t[j]);
      f.rae = rae(m, fm);
      f.dra_curve.resize(t.size() - 1);
      for (std::size_t j = 1; j < t.size(); ++j) {
        const auto c = reference ? reference(t[j]) : sample_law(m[j], mg[j]);
        f.dra_curve[j - 1] = resistor_average(c, fitted_law(f.xi, start, t.front(), t[j]));
      }
      f.dra_median = median(f.dra_curve);
      f.dra_mean = mean(f.dra_curve);
      f.ok = std::isfinite(f.bic);
      if (!f.ok) f.error = "non-finite information criterion";
    } catch (const std::exception& e) {
      f.ok = false;
      f.error = e.what();
    }
  });
  bool any = false;
  for (const auto& f : rep.degrees) any = any || f.ok;
  if (!any) fail(ErrorKind::numerical, "select_degree: every fit failed");
  rep.chosen_p = choose_degree(rep.degrees);
  return rep;
}

}  // namespace msl

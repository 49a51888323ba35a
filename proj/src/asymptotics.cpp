#include "msl/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

FisherInfo fisher_info(const VData& vdata, const ModelParams& xi) {
  xi.validate();
  const auto s = compute_stats(vdata, xi);
  const long q = s.dm.cols();
  FisherInfo fi;
  fi.xi_block = Eigen::MatrixXd::Zero(q, q);
  fi.cross = Eigen::VectorXd::Zero(q);
  for (std::size_t k = 0; k < vdata.groups.size(); ++k) {
    const auto& gr = vdata.groups[k];
    const double cnt = static_cast<double>(gr.count);
    const Eigen::VectorXd dm = s.dm.row(static_cast<long>(k)).transpose();
    fi.xi_block.noalias() += (cnt / gr.delta) * dm * dm.transpose();
    fi.cross += -0.5 * cnt * dm;
  }
  const double s2 = xi.sigma2;
  fi.sigma2_entry = 0.5 * static_cast<double>(vdata.n) / s2 + 0.25 * vdata.z3;
  fi.matrix.resize(q + 1, q + 1);
  fi.matrix.topLeftCorner(q, q) = fi.xi_block;
  fi.matrix.block(0, q, q, 1) = fi.cross;
  fi.matrix.block(q, 0, 1, q) = fi.cross.transpose();
  fi.matrix(q, q) = fi.sigma2_entry;
  fi.matrix /= s2;
  return fi;
}

Covariance invert_fisher(const FisherInfo& fi, double max_condition) {
  const auto& m = fi.matrix;
  const long k = m.rows();
  Eigen::VectorXd dinv(k);
  for (long i = 0; i < k; ++i) {
    if (!(m(i, i) > 0.0)) fail(ErrorKind::numerical, "Fisher information has a nonpositive diagonal entry");
    dinv(i) = 1.0 / std::sqrt(m(i, i));
  }
  const Eigen::MatrixXd e = dinv.asDiagonal() * m * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "eigensolve of Fisher information failed");
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  Covariance out;
  out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(out.condition <= max_condition)) {
    std::ostringstream msg;
    msg << "Fisher information is too ill-conditioned to invert (condition " << out.condition << ")";
    fail(ErrorKind::numerical, msg.str());
  }
  const Eigen::MatrixXd inv_e =
      es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  out.matrix = dinv.asDiagonal() * inv_e * dinv.asDiagonal();
  return out;
}

namespace {

CiEntry make_entry(const std::string& name, double est, double var, const std::vector<double>& levels) {
  CiEntry e;
  e.name = name;
  e.estimate = est;
  e.std_error = std::sqrt(std::max(var, 0.0));
  for (double lv : levels) {
    const double half = two_sided_z(lv) * e.std_error;
    e.intervals.emplace_back(est - half, est + half);
  }
  return e;
}

}  // namespace

CiReport confidence_intervals(const FisherInfo& fi, const ModelParams& xi_hat, const std::vector<double>& levels) {
  for (double lv : levels) {
    if (!(lv > 0.0 && lv < 1.0)) fail(ErrorKind::validation, "confidence levels must lie in (0,1)");
  }
  const auto cov = invert_fisher(fi);
  const Eigen::VectorXd x = pack(xi_hat);
  if (x.size() != cov.matrix.rows()) fail(ErrorKind::shape, "confidence_intervals: degree mismatch");
  CiReport rep;
  rep.levels = levels;
  rep.condition = cov.condition;
  rep.covariance = cov.matrix;
  const long q = x.size();
  for (long k = 0; k < q; ++k) {
    std::string name = k == 0 ? "eta" : (k == q - 1 ? "sigma2" : "beta" + std::to_string(k));
    rep.entries.push_back(make_entry(name, x(k), cov.matrix(k, k), levels));
  }
  return rep;
}

const CiEntry& add_function(CiReport& report, const std::string& name, double value, const Eigen::VectorXd& gradient) {
  if (gradient.size() != report.covariance.rows()) fail(ErrorKind::shape, "add_function: gradient size mismatch");
  const double var = gradient.dot(report.covariance * gradient);
  auto e = make_entry(name, value, var, report.levels);
  e.gradient = gradient;
  report.entries.push_back(std::move(e));
  return report.entries.back();
}

Eigen::VectorXd numeric_gradient(const std::function<double(const ModelParams&)>& g, const ModelParams& xi) {
  const Eigen::VectorXd x = pack(xi);
  Eigen::VectorXd out(x.size());
  for (long k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(std::abs(x(k)), 1e-8);
    Eigen::VectorXd a = x, b = x;
    a(k) += h;
    b(k) -= h;
    out(k) = (g(unpack(a)) - g(unpack(b))) / (2.0 * h);
  }
  return out;
}

InitialParamLaws initial_param_laws(std::size_t d, double sigma1sq) {
  if (d < 2) fail(ErrorKind::validation, "initial_param_laws: needs d >= 2");
  if (!(sigma1sq >= 0.0)) fail(ErrorKind::domain, "initial_param_laws: sigma1sq must be nonnegative");
  return {d, sigma1sq / static_cast<double>(d), static_cast<double>(d - 1)};
}

std::pair<double, double> mu1_interval(double mu1_hat, double sigma1sq_hat, std::size_t d, double level) {
  if (d < 2) fail(ErrorKind::validation, "mu1_interval: needs d >= 2");
  // sigma1sq_hat divides by d; the unbiased variance of the mean is sigma1sq_hat / (d - 1).
  const double se = std::sqrt(sigma1sq_hat / static_cast<double>(d - 1));
  const double q = student_t_quantile(static_cast<double>(d - 1), 0.5 * (1.0 + level));
  return {mu1_hat - q * se, mu1_hat + q * se};
}

std::pair<double, double> sigma1sq_interval(double sigma1sq_hat, std::size_t d, double level) {
  if (d < 2) fail(ErrorKind::validation, "sigma1sq_interval: needs d >= 2");
  const double dof = static_cast<double>(d - 1);
  const double stat = static_cast<double>(d) * sigma1sq_hat;
  return {stat / chi_squared_quantile(dof, 0.5 * (1.0 + level)), stat / chi_squared_quantile(dof, 0.5 * (1.0 - level))};
}

}  // namespace msl

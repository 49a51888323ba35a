#include "msl/regression.hpp"

#include <cmath>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

std::pair<double, double> LsqFit::interval(long k, double confidence) const {
  if (dof < 1) fail(ErrorKind::numerical, "regression interval needs positive residual degrees of freedom");
  const double q = student_t_quantile(static_cast<double>(dof), 0.5 * (1.0 + confidence));
  const double half = q * std::sqrt(cov(k, k));
  return {coef(k) - half, coef(k) + half};
}

LsqFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const long rows = x.rows();
  const long cols = x.cols();
  if (rows != y.size()) fail(ErrorKind::shape, "least_squares: design and response sizes differ");
  if (rows < cols) fail(ErrorKind::validation, "least_squares: fewer observations than coefficients");

  // Columns of a monomial design span many orders of magnitude; equilibrate first.
  Eigen::VectorXd scale(cols);
  for (long k = 0; k < cols; ++k) {
    const double nrm = x.col(k).norm();
    scale(k) = nrm > 0.0 ? 1.0 / nrm : 1.0;
  }
  const Eigen::MatrixXd xs = x * scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  if (qr.rank() < cols) fail(ErrorKind::numerical, "least_squares: design matrix is rank deficient");

  LsqFit out;
  out.coef = scale.asDiagonal() * qr.solve(y);
  out.residuals = y - x * out.coef;
  out.dof = rows - cols;
  const double rss = out.residuals.squaredNorm();
  out.residual_variance = out.dof > 0 ? rss / static_cast<double>(out.dof) : 0.0;
  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  out.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;

  // (Xs^T Xs)^{-1} = P R^{-1} R^{-T} P^T
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(cols, cols));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd inner = perm * (rinv * rinv.transpose()) * perm.transpose();
  out.cov = out.residual_variance * (scale.asDiagonal() * inner * scale.asDiagonal());
  return out;
}

Eigen::MatrixXd poly_design(std::span<const double> t, std::size_t p, bool intercept) {
  const long off = intercept ? 1 : 0;
  Eigen::MatrixXd x(static_cast<long>(t.size()), static_cast<long>(p) + off);
  for (std::size_t j = 0; j < t.size(); ++j) {
    const long r = static_cast<long>(j);
    if (intercept) x(r, 0) = 1.0;
    double pw = 1.0;
    for (std::size_t k = 1; k <= p; ++k) {
      pw *= t[j];
      x(r, static_cast<long>(k) - 1 + off) = pw;
    }
  }
  return x;
}

}  // namespace msl

#include "msl/numeric.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <thread>

#include "msl/error.hpp"

namespace msl {

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal{}, x); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::domain, "normal_quantile: probability must lie in (0,1)");
  return boost::math::quantile(boost::math::normal{}, p);
}

double student_t_quantile(double dof, double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::domain, "student_t_quantile: probability must lie in (0,1)");
  return boost::math::quantile(boost::math::students_t{dof}, p);
}

double chi_squared_quantile(double dof, double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::domain, "chi_squared_quantile: probability must lie in (0,1)");
  return boost::math::quantile(boost::math::chi_squared{dof}, p);
}

double two_sided_z(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::domain, "confidence level must lie in (0,1)");
  return normal_quantile(0.5 + 0.5 * level);
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::shape, "median of an empty series");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double mean(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::shape, "mean of an empty series");
  KahanSum s;
  for (double v : values) s += v;
  return s.value() / static_cast<double>(values.size());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * block);
        for (std::size_t i = w * block; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace msl

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace msl {

/// Neumaier-compensated accumulator.
class KahanSum {
 public:
  KahanSum& operator+=(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double normal_cdf(double x);
double normal_quantile(double p);
double student_t_quantile(double dof, double p);
double chi_squared_quantile(double dof, double p);

/// z such that P(|Z| <= z) = level.
double two_sided_z(double level);

double median(std::vector<double> values);
double mean(std::span<const double> values);

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Work is
/// split into contiguous blocks so results written by index are independent of
/// the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace msl

#include "msl/panel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msl/error.hpp"
#include "msl/numeric.hpp"

namespace msl {

PathPanel::PathPanel(std::vector<Path> paths) : paths_(std::move(paths)) {
  if (paths_.empty()) fail(ErrorKind::validation, "panel needs at least one path");
  const double first = paths_.front().times.empty() ? 0.0 : paths_.front().times.front();
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    const auto& p = paths_[i];
    const auto where = "path " + std::to_string(i);
    if (p.times.empty() || p.times.size() != p.values.size()) {
      fail(ErrorKind::validation, where + ": times and values must be non-empty and of equal length");
    }
    if (p.times.front() != first) fail(ErrorKind::validation, where + ": first observation time differs");
    for (std::size_t j = 0; j < p.times.size(); ++j) {
      if (!(p.values[j] > 0.0) || !std::isfinite(p.values[j])) {
        fail(ErrorKind::domain, where + ", index " + std::to_string(j) + ": value must be positive");
      }
      if (j > 0 && !(p.times[j] > p.times[j - 1])) {
        fail(ErrorKind::validation, where + ", index " + std::to_string(j) + ": times must increase");
      }
    }
  }
}

bool PathPanel::has_common_grid() const noexcept {
  return std::all_of(paths_.begin(), paths_.end(), [&](const Path& p) { return p.times == paths_.front().times; });
}

const std::vector<double>& PathPanel::common_grid() const {
  if (paths_.empty() || !has_common_grid()) fail(ErrorKind::shape, "paths do not share a common time grid");
  return paths_.front().times;
}

PathPanel PathPanel::truncated(double t_last) const {
  std::vector<Path> out;
  out.reserve(paths_.size());
  for (const auto& p : paths_) {
    const auto end = std::upper_bound(p.times.begin(), p.times.end(), t_last) - p.times.begin();
    if (end < 2) fail(ErrorKind::validation, "truncation leaves fewer than two observations on a path");
    out.push_back({{p.times.begin(), p.times.begin() + end}, {p.values.begin(), p.values.begin() + end}});
  }
  return PathPanel(std::move(out));
}

PathPanel PathPanel::scaled_by_max() const {
  std::vector<Path> out = paths_;
  for (auto& p : out) {
    const double top = *std::max_element(p.values.begin(), p.values.end());
    for (double& v : p.values) v /= top;
  }
  return PathPanel(std::move(out));
}

std::vector<double> sample_mean(const PathPanel& panel) {
  const auto& grid = panel.common_grid();
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    KahanSum s;
    for (const auto& p : panel.paths()) s += p.values[j];
    out[j] = s.value() / static_cast<double>(panel.size());
  }
  return out;
}

std::vector<double> geometric_mean(const PathPanel& panel) {
  const auto& grid = panel.common_grid();
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    KahanSum s;
    for (const auto& p : panel.paths()) s += std::log(p.values[j]);
    out[j] = std::exp(s.value() / static_cast<double>(panel.size()));
  }
  return out;
}

}  // namespace msl

#pragma once

#include <cstddef>
#include <vector>

namespace msl {

/// One observed sample path.
struct Path {
  std::vector<double> times;
  std::vector<double> values;
};

/// d discretely observed paths sharing their first observation time.
class PathPanel {
 public:
  PathPanel() = default;
  /// Validates: at least one path, matching lengths, strictly increasing
  /// times, positive values and a common first time.
  explicit PathPanel(std::vector<Path> paths);

  std::size_t size() const noexcept { return paths_.size(); }
  const Path& operator[](std::size_t i) const { return paths_.at(i); }
  const std::vector<Path>& paths() const noexcept { return paths_; }
  double t0() const { return paths_.front().times.front(); }

  bool has_common_grid() const noexcept;
  /// Throws a shape error unless all paths share one grid.
  const std::vector<double>& common_grid() const;

  /// Paths restricted to times <= t_last (at least two points must remain).
  PathPanel truncated(double t_last) const;
  /// Each path divided by its own maximum.
  PathPanel scaled_by_max() const;

 private:
  std::vector<Path> paths_;
};

/// Pointwise arithmetic mean over paths on a common grid.
std::vector<double> sample_mean(const PathPanel& panel);
/// Pointwise geometric mean over paths on a common grid.
std::vector<double> geometric_mean(const PathPanel& panel);

}  // namespace msl

#include "msl/simulate.hpp"

#include <cmath>

#include "msl/error.hpp"
#include "msl/numeric.hpp"
#include "msl/rng.hpp"

namespace msl {

void SimSpec::validate() const {
  // sigma2 = 0 is allowed here: the paths are then the deterministic curve.
  static_cast<const GrowthParams&>(params).validate();
  if (!(params.sigma2 >= 0.0) || !std::isfinite(params.sigma2)) fail(ErrorKind::domain, "sigma2 must be nonnegative");
  msl::validate(init);
  if (paths < 1) fail(ErrorKind::validation, "simulation needs at least one path");
  if (grid.empty()) fail(ErrorKind::validation, "simulation grid is empty");
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1])) fail(ErrorKind::validation, "simulation grid must be strictly increasing");
  }
}

PathPanel simulate_panel(const SimSpec& spec) {
  spec.validate();
  const auto& grid = spec.grid;
  const double t0 = grid.front();
  const auto start = log_moments(spec.init);
  const double sigma = std::sqrt(spec.params.sigma2);

  // log X(t_j) = log X0 + H(t0, t_j) + sigma W(t_j - t0); H is exact at each node.
  std::vector<double> drift(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) drift[j] = integrated_drift(spec.params, t0, grid[j]);

  std::vector<Path> paths(spec.paths);
  parallel_for(spec.paths, [&](std::size_t i) {
    CounterRng rng(spec.seed, i);
    double log_x0 = start.mu1;
    if (start.sigma1sq > 0.0) log_x0 += std::sqrt(start.sigma1sq) * rng.normal();
    Path& p = paths[i];
    p.times = grid;
    p.values.resize(grid.size());
    p.values[0] = std::exp(log_x0);
    double w = 0.0;
    for (std::size_t j = 1; j < grid.size(); ++j) {
      w += std::sqrt(grid[j] - grid[j - 1]) * rng.normal();
      p.values[j] = std::exp(log_x0 + drift[j] + sigma * w);
    }
  });
  return PathPanel(std::move(paths));
}

std::vector<double> uniform_grid(double t0, double t1, std::size_t intervals) {
  if (intervals < 1 || !(t1 > t0)) fail(ErrorKind::validation, "uniform_grid needs t1 > t0 and intervals >= 1");
  std::vector<double> g(intervals + 1);
  const double h = (t1 - t0) / static_cast<double>(intervals);
  for (std::size_t j = 0; j <= intervals; ++j) g[j] = t0 + h * static_cast<double>(j);
  g.back() = t1;
  return g;
}

}  // namespace msl

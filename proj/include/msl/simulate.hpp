#pragma once

#include <cstdint>
#include <vector>

#include "msl/model.hpp"
#include "msl/panel.hpp"

namespace msl {

struct SimSpec {
  ModelParams params;
  InitialDistribution init;
  std::vector<double> grid;
  std::size_t paths = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exact simulation from the lognormal transition law. Path i draws from the
/// counter-based stream (seed, i), so the panel does not depend on the order
/// in which paths are generated.
PathPanel simulate_panel(const SimSpec& spec);

/// n + 1 equally spaced points on [t0, t1].
std::vector<double> uniform_grid(double t0, double t1, std::size_t intervals);

}  // namespace msl

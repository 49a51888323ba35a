#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msl/likelihood.hpp"
#include "msl/model.hpp"
#include "msl/panel.hpp"

namespace msl {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

struct ParamBox {
  Interval eta;
  std::vector<Interval> beta;
  Interval sigma2{0.0, 0.01};
  /// Paths left out of the eta bounds because they did not grow.
  std::vector<std::size_t> excluded_paths;

  std::size_t dim() const noexcept { return beta.size() + 2; }
  Interval axis(std::size_t k) const;
  bool contains(const Eigen::VectorXd& x) const;
};

ParamBox build_box(const PathPanel& panel, std::size_t p, double confidence = 0.999);

struct SaSchedule {
  double p0 = 0.9;
  double gamma = 0.95;
  int chain_length = 50;
  int max_iter = 1000;
  double t_final = 1e-7;
  std::uint64_t seed = 1;
  int replications = 10;
  int pilot_pairs = 100;

  void validate() const;
};

/// One proposal, reported to an optional observer.
struct SaEvent {
  int replication = 0;
  int iteration = 0;
  double temperature = 0.0;
  Eigen::VectorXd proposal;
  double delta_f = 0.0;
  double uniform = 0.0;
  bool accepted = false;
};

struct SaReplication {
  ModelParams xi{{1.0, PolyCoeffs({0.0})}, 1.0};
  /// -L~ at xi
  double objective = 0.0;
  int iterations = 0;
  double t0 = 0.0;
  std::string stop_reason;
};

struct SaResult {
  ModelParams xi_hat{{1.0, PolyCoeffs({0.0})}, 1.0};
  std::vector<SaReplication> per_replication;
};

using SaObserver = std::function<void(const SaEvent&)>;

/// Minimizes -L~ over the box. Replications run concurrently unless an
/// observer is supplied, in which case they run in order on this thread.
SaResult anneal(const VData& vdata, const ParamBox& box, const SaSchedule& sched, const SaObserver& observer = {});
SaResult anneal(const PathPanel& panel, std::size_t p, const ParamBox& box, const SaSchedule& sched,
                const SaObserver& observer = {});

}  // namespace msl

#pragma once

#include <vector>

#include "twinforge/routing.h"
#include "twinforge/types.h"

namespace twinforge::qt {

struct Mm1bResult {
  double blocking = 0.0;         // P_b
  double mean_queue_len = 0.0;   // L, packets in system
  double mean_sojourn = 0.0;     // W, seconds, delivered packets only
};

/// Stationary metrics of an M/M/1/b queue (b counts the packet in service).
/// Throws std::invalid_argument for rho < 0, b < 1 or mu <= 0.
Mm1bResult Mm1bMetrics(double rho, int b, double mu);

struct LinkState {
  double offered_load = 0.0;  // packets/s, after upstream thinning
  double service_rate = 0.0;  // packets/s
  int buffer = 1;
  double blocking = 0.0;
  double mean_sojourn = 0.0;
};

struct FixedPointOptions {
  double tol = 1e-8;
  int max_iter = 10'000;
  double damping = 0.5;
  /// When false, every link sees the raw demand rates of its paths.
  bool thinning = true;
  /// Per-link propagation delay added to path delays, seconds.
  double propagation_delay = 0.0;
};

void ValidateFixedPointOptions(const FixedPointOptions& opts);

struct FixedPointResult {
  std::vector<LinkState> links;
  int iterations = 0;
  bool converged = false;
  /// max |f(P) - P| over links at the returned blocking vector P.
  double residual = 0.0;
};

/// One application of the reduced-load map: offered loads from the given
/// blocking vector, then per-link M/M/1/b states.
std::vector<LinkState> ReducedLoadStep(const Topology& topo, const TrafficMatrix& tm,
                                       const RoutingConfig& routing,
                                       const std::vector<double>& blocking,
                                       bool thinning = true);

/// Reduced-load fixed point over link blocking probabilities. Never throws
/// on non-convergence; check `converged`.
FixedPointResult ReducedLoadFixedPoint(const Topology& topo, const TrafficMatrix& tm,
                                       const RoutingConfig& routing,
                                       const FixedPointOptions& opts = {});

struct QtPathResult {
  PathMetrics paths;
  bool converged = true;
};

/// Per-demand delay (sum of link sojourns) and loss (1 - prod(1 - P_b)).
QtPathResult PathMetricsFromLinks(const Topology& topo, const TrafficMatrix& tm,
                                  const RoutingConfig& routing,
                                  const std::vector<LinkState>& links,
                                  double propagation_delay = 0.0);

QtPathResult QtPathMetrics(const Topology& topo, const TrafficMatrix& tm,
                           const RoutingConfig& routing,
                           const FixedPointOptions& opts = {});

double MaxBlocking(const std::vector<LinkState>& links);

}  // namespace twinforge::qt

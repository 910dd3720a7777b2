#pragma once

#include <cstdint>
#include <vector>

#include "twinforge/routing.h"
#include "twinforge/types.h"

namespace twinforge::sim {

struct SimConfig {
  double warmup = 0.0;    // seconds, packets injected earlier are not measured
  double duration = 1.0;  // seconds of measured injection after warmup
  std::uint64_t seed = 1;
  double propagation_delay = 0.0;  // seconds per link
};

void ValidateSimConfig(const SimConfig& cfg);

struct LinkCounters {
  std::uint64_t arrivals = 0;    // packets offered to the queue
  std::uint64_t departures = 0;
  std::uint64_t drops = 0;
  std::uint64_t in_queue_at_end = 0;
  std::uint64_t fifo_violations = 0;
  /// Integral of packets-in-system over the measurement window.
  double queue_area = 0.0;
  /// Accepted (not dropped) arrivals inside the measurement window.
  std::uint64_t window_accepted = 0;
};

struct SimStats {
  std::uint64_t events = 0;
  std::uint64_t injected = 0;    // all packets, including warmup
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight_at_end = 0;
  double window = 0.0;           // length of the measurement window, seconds
  std::vector<LinkCounters> links;
};

struct SimResult {
  PathMetrics paths;
  SimStats stats;
};

/// Packet-level FIFO drop-tail simulation with Poisson arrivals and
/// exponential packet sizes resampled at every hop. Injection stops at
/// warmup + duration and the network then drains, so every measured packet
/// ends up delivered or dropped.
SimResult Simulate(const Topology& topo, const TrafficMatrix& tm,
                   const RoutingConfig& routing, const SimConfig& cfg);

/// Rough number of events Simulate will process.
double EstimateEventCount(const SimConfig& cfg, const TrafficMatrix& tm, double mean_hops);

/// Average hop count over the demands of `tm`.
double MeanHops(const TrafficMatrix& tm, const RoutingConfig& routing);

}  // namespace twinforge::sim

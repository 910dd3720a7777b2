#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinforge {

using NodeId = int;
using LinkId = int;

/// A directed link. Capacity in bits/s, buffer in packets (including the
/// one in service).
struct Link {
  NodeId src = 0;
  NodeId dst = 0;
  double capacity = 0.0;
  int buffer = 1;

  bool operator==(const Link&) const = default;
};

/// Directed-link graph. Every link is stored together with its reverse.
struct Topology {
  int nodes = 0;
  std::vector<Link> links;

  bool operator==(const Topology&) const = default;

  /// Outgoing link ids per node, in link-id order.
  std::vector<std::vector<LinkId>> OutLinks() const;
};

/// Throws std::invalid_argument on gaps, dangling ids, missing reverse links,
/// non-positive capacity or buffer < 1. Does not check connectivity.
void ValidateTopology(const Topology& topo);

/// True when every node reaches every other node along directed links.
bool IsStronglyConnected(const Topology& topo);

struct Demand {
  NodeId src = 0;
  NodeId dst = 0;
  double rate = 0.0;  // bits/s

  bool operator==(const Demand&) const = default;
};

/// Per origin-destination offered traffic. The list order is the canonical
/// demand order for everything downstream (labels, predictions).
struct TrafficMatrix {
  std::vector<Demand> demands;
  double mean_packet_size = 1000.0;  // bits

  bool operator==(const TrafficMatrix&) const = default;
};

void ValidateTraffic(const TrafficMatrix& tm, int nodes);

/// Per-demand evaluation result shared by the simulator, the analytical model
/// and the twin. delivered is the packet count for simulator output and zero
/// for model output.
struct PathMetric {
  NodeId src = 0;
  NodeId dst = 0;
  double mean_delay = 0.0;  // seconds
  double loss = 0.0;        // ratio
  std::uint64_t delivered = 0;

  bool operator==(const PathMetric&) const = default;
};

using PathMetrics = std::vector<PathMetric>;

double MeanDelay(const PathMetrics& metrics);

}  // namespace twinforge

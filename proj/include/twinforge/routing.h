#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "twinforge/types.h"

namespace twinforge {

class UnreachableDestination : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownPair : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Weights below this are raised to it before paths are derived.
inline constexpr double kMinLinkWeight = 1e-3;

/// Destination-based single-path routing. Paths are a pure function of
/// (topology, weights) and are never persisted on their own.
class RoutingConfig {
 public:
  RoutingConfig() = default;

  int nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Next link from `node` toward `dst`, or -1 when node == dst.
  LinkId NextHop(NodeId node, NodeId dst) const {
    return next_hop_[static_cast<std::size_t>(node) * nodes_ + dst];
  }

  /// Stored contiguous path. Throws UnknownPair for self pairs or ids out of
  /// range.
  const std::vector<LinkId>& LinksOfPath(NodeId src, NodeId dst) const;

 private:
  friend RoutingConfig DeriveRouting(const Topology&, std::span<const double>);

  int nodes_ = 0;
  std::vector<double> weights_;
  std::vector<LinkId> next_hop_;                // nodes x nodes
  std::vector<std::vector<LinkId>> paths_;      // nodes x nodes
};

/// Per destination, Dijkstra over reversed links. Equal-cost ties go to the
/// smallest next-hop node id, so all paths toward one destination form a
/// tree. Weights are clamped to >= kMinLinkWeight.
RoutingConfig DeriveRouting(const Topology& topo, std::span<const double> weights);

/// All-ones weights.
RoutingConfig DeriveEqualWeightRouting(const Topology& topo);

/// Sum of (clamped) weights along a path.
double PathCost(std::span<const double> weights, std::span<const LinkId> path);

/// Throws std::invalid_argument unless `path` is a contiguous, cycle-free
/// src->dst walk over topo's links.
void ValidatePath(const Topology& topo, std::span<const LinkId> path, NodeId src,
                  NodeId dst);

}  // namespace twinforge

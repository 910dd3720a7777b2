#include "twinforge/routing.h"

#include <algorithm>
#include <limits>
#include <queue>
#include <string>
#include <utility>

namespace twinforge {

const std::vector<LinkId>& RoutingConfig::LinksOfPath(NodeId src, NodeId dst) const {
  if (src < 0 || dst < 0 || src >= nodes_ || dst >= nodes_ || src == dst) {
    throw UnknownPair("no path for pair (" + std::to_string(src) + "," +
                      std::to_string(dst) + ")");
  }
  return paths_[static_cast<std::size_t>(src) * nodes_ + dst];
}

RoutingConfig DeriveRouting(const Topology& topo, std::span<const double> weights) {
  if (weights.size() != topo.links.size()) {
    throw std::invalid_argument("routing: need one weight per link");
  }
  const int n = topo.nodes;
  RoutingConfig rc;
  rc.nodes_ = n;
  rc.weights_.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("routing: weight must be > 0");
    rc.weights_[i] = std::max(weights[i], kMinLinkWeight);
  }

  std::vector<std::vector<LinkId>> in_links(n);
  for (LinkId id = 0; id < static_cast<LinkId>(topo.links.size()); ++id) {
    in_links[topo.links[id].dst].push_back(id);
  }
  const auto out_links = topo.OutLinks();

  rc.next_hop_.assign(static_cast<std::size_t>(n) * n, -1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n);
  using Entry = std::pair<double, NodeId>;
  for (NodeId d = 0; d < n; ++d) {
    std::fill(dist.begin(), dist.end(), kInf);
    dist[d] = 0.0;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    heap.emplace(0.0, d);
    while (!heap.empty()) {
      auto [du, u] = heap.top();
      heap.pop();
      if (du > dist[u]) continue;
      for (LinkId id : in_links[u]) {
        const NodeId v = topo.links[id].src;
        const double alt = du + rc.weights_[id];
        if (alt < dist[v]) {
          dist[v] = alt;
          heap.emplace(alt, v);
        }
      }
    }
    for (NodeId v = 0; v < n; ++v) {
      if (v == d) continue;
      if (dist[v] == kInf) {
        throw UnreachableDestination("node " + std::to_string(d) +
                                     " unreachable from " + std::to_string(v));
      }
      LinkId best = -1;
      double best_cost = kInf;
      NodeId best_node = n;
      for (LinkId id : out_links[v]) {
        const NodeId u = topo.links[id].dst;
        const double c = dist[u] + rc.weights_[id];
        if (c < best_cost || (c == best_cost && u < best_node)) {
          best = id;
          best_cost = c;
          best_node = u;
        }
      }
      rc.next_hop_[static_cast<std::size_t>(v) * n + d] = best;
    }
  }

  rc.paths_.assign(static_cast<std::size_t>(n) * n, {});
  for (NodeId s = 0; s < n; ++s) {
    for (NodeId d = 0; d < n; ++d) {
      if (s == d) continue;
      auto& path = rc.paths_[static_cast<std::size_t>(s) * n + d];
      NodeId cur = s;
      while (cur != d) {
        const LinkId id = rc.next_hop_[static_cast<std::size_t>(cur) * n + d];
        path.push_back(id);
        cur = topo.links[id].dst;
        if (static_cast<int>(path.size()) > n) {
          throw std::logic_error("routing: forwarding loop");
        }
      }
    }
  }
  return rc;
}

RoutingConfig DeriveEqualWeightRouting(const Topology& topo) {
  std::vector<double> ones(topo.links.size(), 1.0);
  return DeriveRouting(topo, ones);
}

double PathCost(std::span<const double> weights, std::span<const LinkId> path) {
  double c = 0.0;
  for (LinkId id : path) c += std::max(weights[id], kMinLinkWeight);
  return c;
}

void ValidatePath(const Topology& topo, std::span<const LinkId> path, NodeId src,
                  NodeId dst) {
  if (path.empty()) throw std::invalid_argument("path: empty");
  std::vector<bool> visited(topo.nodes, false);
  NodeId cur = src;
  visited[cur] = true;
  for (LinkId id : path) {
    if (id < 0 || id >= static_cast<LinkId>(topo.links.size())) {
      throw std::invalid_argument("path: link id out of range");
    }
    const Link& l = topo.links[id];
    if (l.src != cur) throw std::invalid_argument("path: not contiguous");
    cur = l.dst;
    if (visited[cur]) throw std::invalid_argument("path: revisits a node");
    visited[cur] = true;
  }
  if (cur != dst) throw std::invalid_argument("path: wrong endpoint");
}

}  // namespace twinforge

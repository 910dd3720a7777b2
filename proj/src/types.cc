#include "twinforge/types.h"

#include <algorithm>
#include <queue>
#include <set>
#include <utility>

namespace twinforge {

std::vector<std::vector<LinkId>> Topology::OutLinks() const {
  std::vector<std::vector<LinkId>> out(nodes);
  for (LinkId id = 0; id < static_cast<LinkId>(links.size()); ++id) {
    out[links[id].src].push_back(id);
  }
  return out;
}

void ValidateTopology(const Topology& topo) {
  if (topo.nodes < 1) throw std::invalid_argument("topology: no nodes");
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const Link& l : topo.links) {
    if (l.src < 0 || l.src >= topo.nodes || l.dst < 0 || l.dst >= topo.nodes) {
      throw std::invalid_argument("topology: link endpoint out of range");
    }
    if (l.src == l.dst) throw std::invalid_argument("topology: self loop");
    if (!(l.capacity > 0.0)) {
      throw std::invalid_argument("topology: capacity must be > 0");
    }
    if (l.buffer < 1) throw std::invalid_argument("topology: buffer must be >= 1");
    if (!seen.emplace(l.src, l.dst).second) {
      throw std::invalid_argument("topology: duplicate link");
    }
  }
  for (const auto& [u, v] : seen) {
    if (!seen.count({v, u})) {
      throw std::invalid_argument("topology: link without reverse");
    }
  }
}

namespace {

std::vector<bool> Reach(const std::vector<std::vector<NodeId>>& adj, NodeId from) {
  std::vector<bool> seen(adj.size(), false);
  std::queue<NodeId> q;
  q.push(from);
  seen[from] = true;
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (NodeId v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        q.push(v);
      }
    }
  }
  return seen;
}

}  // namespace

bool IsStronglyConnected(const Topology& topo) {
  if (topo.nodes <= 1) return true;
  std::vector<std::vector<NodeId>> fwd(topo.nodes), rev(topo.nodes);
  for (const Link& l : topo.links) {
    fwd[l.src].push_back(l.dst);
    rev[l.dst].push_back(l.src);
  }
  auto all = [](const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
  };
  return all(Reach(fwd, 0)) && all(Reach(rev, 0));
}

void ValidateTraffic(const TrafficMatrix& tm, int nodes) {
  if (!(tm.mean_packet_size > 0.0)) {
    throw std::invalid_argument("traffic: mean_packet_size must be > 0");
  }
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const Demand& d : tm.demands) {
    if (d.src < 0 || d.src >= nodes || d.dst < 0 || d.dst >= nodes) {
      throw std::invalid_argument("traffic: demand endpoint out of range");
    }
    if (d.src == d.dst) throw std::invalid_argument("traffic: src == dst");
    if (!(d.rate >= 0.0)) throw std::invalid_argument("traffic: negative rate");
    if (!seen.emplace(d.src, d.dst).second) {
      throw std::invalid_argument("traffic: duplicate demand");
    }
  }
}

double MeanDelay(const PathMetrics& metrics) {
  if (metrics.empty()) return 0.0;
  double sum = 0.0;
  for (const PathMetric& m : metrics) sum += m.mean_delay;
  return sum / static_cast<double>(metrics.size());
}

}  // namespace twinforge

#pragma once

#include <initializer_list>
#include <set>
#include <tuple>
#include <vector>

#include "twinforge/rng.h"
#include "twinforge/routing.h"
#include "twinforge/scenario.h"
#include "twinforge/types.h"

namespace twinforge::testing {

/// Bidirectional links for each (u, v, capacity) edge, in the given order:
/// link 2k is u->v and 2k+1 is v->u.
inline Topology MakeTopology(int nodes, std::initializer_list<std::tuple<int, int, double>> edges,
                             int buffer = 32) {
  Topology t;
  t.nodes = nodes;
  for (const auto& [u, v, cap] : edges) {
    t.links.push_back({u, v, cap, buffer});
    t.links.push_back({v, u, cap, buffer});
  }
  return t;
}

inline LinkId FindLink(const Topology& t, NodeId u, NodeId v) {
  for (LinkId i = 0; i < static_cast<LinkId>(t.links.size()); ++i) {
    if (t.links[i].src == u && t.links[i].dst == v) return i;
  }
  return -1;
}

inline TrafficMatrix OneDemand(NodeId s, NodeId d, double rate, double mean_size = 1000.0) {
  TrafficMatrix tm;
  tm.mean_packet_size = mean_size;
  tm.demands.push_back({s, d, rate});
  return tm;
}

inline TrafficMatrix UniformTraffic(int nodes, double rate, double mean_size = 1000.0) {
  TrafficMatrix tm;
  tm.mean_packet_size = mean_size;
  for (int s = 0; s < nodes; ++s) {
    for (int d = 0; d < nodes; ++d) {
      if (s != d) tm.demands.push_back({s, d, rate});
    }
  }
  return tm;
}

/// Random connected graph: a random tree plus extra edges with probability p.
inline Topology RandomGraph(Rng& rng, int n, double p) {
  Topology t;
  t.nodes = n;
  std::set<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) {
    const int u = static_cast<int>(rng.UniformInt(0, v - 1));
    edges.insert({u, v});
  }
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.Uniform01() < p) edges.insert({u, v});
    }
  }
  for (auto [u, v] : edges) {
    t.links.push_back({u, v, 1e4, 32});
    t.links.push_back({v, u, 1e4, 32});
  }
  return t;
}

/// A generated, screened but unlabelled scenario.
inline scenario::Sample Scenario(std::uint64_t seed, int n_min, int n_max,
                                 std::pair<double, double> intensity = {200.0, 3000.0},
                                 std::uint64_t index = 0) {
  scenario::ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.n_range = {n_min, n_max};
  cfg.intensity_range = intensity;
  scenario::SampleOptions opts;
  opts.labeler = scenario::Labeler::kQt;
  auto s = scenario::GenSample(index, cfg, opts);
  s.label.reset();
  return s;
}

}  // namespace twinforge::testing

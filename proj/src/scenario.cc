#include "twinforge/scenario.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "twinforge/rng.h"

namespace twinforge::scenario {

void ValidateConfig(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("scenario config: " + field + " " + why);
  };
  if (cfg.n_range.first < 2) fail("n_range", "min must be >= 2");
  if (cfg.n_range.first > cfg.n_range.second) fail("n_range", "min must be <= max");
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) fail("alpha", "must be >= 0");
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta)) fail("beta", "must be > 0");
  if (cfg.capacity_set.empty()) fail("capacity_set", "must be non-empty");
  for (double c : cfg.capacity_set) {
    if (!(c > 0.0)) fail("capacity_set", "entries must be > 0");
  }
  if (cfg.buffer < 1) fail("buffer", "must be >= 1");
  if (!(cfg.intensity_range.first > 0.0)) fail("intensity_range", "min must be > 0");
  if (cfg.intensity_range.first > cfg.intensity_range.second) {
    fail("intensity_range", "min must be <= max");
  }
  if (!(cfg.max_loss > 0.0 && cfg.max_loss < 1.0)) fail("max_loss", "must be in (0, 1)");
  if (!(cfg.mean_packet_size > 0.0)) fail("mean_packet_size", "must be > 0");
}

Topology GenTopology(std::uint64_t seed, const ScenarioConfig& cfg) {
  ValidateConfig(cfg);
  Rng rng(seed);
  const int n = static_cast<int>(rng.UniformInt(cfg.n_range.first, cfg.n_range.second));

  std::vector<int> credits(n);
  for (int& c : credits) {
    const double x = 1.0 - rng.Uniform01();  // (0, 1]
    c = static_cast<int>(std::lround(cfg.beta * std::pow(x, -cfg.alpha)));
  }

  std::vector<std::pair<int, int>> edges;
  std::vector<std::set<int>> adj(n);
  auto add_edge = [&](int u, int v) {
    edges.emplace_back(u, v);
    adj[u].insert(v);
    adj[v].insert(u);
    credits[u] = std::max(0, credits[u] - 1);
    credits[v] = std::max(0, credits[v] - 1);
  };

  // Random spanning tree: attach each node of a random permutation to an
  // earlier one.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.UniformInt(0, i)]);
  }
  for (int k = 1; k < n; ++k) {
    add_edge(order[k], order[rng.UniformInt(0, k - 1)]);
  }

  // Spend remaining credits on random non-duplicate edges. A node whose
  // credit cannot be matched with any non-adjacent credited node forfeits it.
  std::vector<int> pool;
  std::vector<int> partners;
  while (true) {
    pool.clear();
    for (int i = 0; i < n; ++i) {
      if (credits[i] > 0) pool.push_back(i);
    }
    if (pool.size() < 2) break;
    const int u = pool[rng.UniformInt(0, static_cast<std::int64_t>(pool.size()) - 1)];
    partners.clear();
    for (int v : pool) {
      if (v != u && !adj[u].count(v)) partners.push_back(v);
    }
    if (partners.empty()) {
      credits[u] = 0;
      continue;
    }
    add_edge(u, partners[rng.UniformInt(0, static_cast<std::int64_t>(partners.size()) - 1)]);
  }

  Topology topo;
  topo.nodes = n;
  topo.links.reserve(edges.size() * 2);
  const auto ncap = static_cast<std::int64_t>(cfg.capacity_set.size());
  for (const auto& [u, v] : edges) {
    const double cap = cfg.capacity_set[rng.UniformInt(0, ncap - 1)];
    topo.links.push_back({u, v, cap, cfg.buffer});
    topo.links.push_back({v, u, cap, cfg.buffer});
  }
  return topo;
}

TrafficMatrix GenTraffic(std::uint64_t seed, const Topology& topo, double intensity,
                         double mean_packet_size) {
  if (!(intensity > 0.0)) throw std::invalid_argument("traffic: intensity must be > 0");
  if (!(mean_packet_size > 0.0)) {
    throw std::invalid_argument("traffic: mean_packet_size must be > 0");
  }
  Rng rng(seed);
  TrafficMatrix tm;
  tm.mean_packet_size = mean_packet_size;
  double sum = 0.0;
  for (NodeId s = 0; s < topo.nodes; ++s) {
    for (NodeId d = 0; d < topo.nodes; ++d) {
      if (s == d) continue;
      const double rate = intensity * rng.Uniform(0.1, 1.0);
      tm.demands.push_back({s, d, rate});
      sum += rate;
    }
  }
  if (tm.demands.empty()) return tm;
  const double scale = intensity * static_cast<double>(tm.demands.size()) / sum;
  for (Demand& d : tm.demands) d.rate *= scale;
  return tm;
}

void LabelSample(Sample& s, Labeler labeler, const sim::SimConfig& sim_cfg) {
  if (labeler == Labeler::kSimulator) {
    s.label = sim::Simulate(s.topology, s.traffic, s.routing, sim_cfg).paths;
  } else {
    s.label = qt::QtPathMetrics(s.topology, s.traffic, s.routing).paths;
  }
}

Sample GenSample(std::uint64_t index, const ScenarioConfig& cfg, const SampleOptions& opts) {
  ValidateConfig(cfg);
  const std::uint64_t sample_seed = DeriveSeed(cfg.seed, index);
  Sample s;
  s.index = index;
  s.topology = GenTopology(DeriveSeed(sample_seed, "topology"), cfg);

  std::vector<double> weights(s.topology.links.size(), 1.0);
  if (index % 2 == 1) {
    Rng wrng(DeriveSeed(sample_seed, "weights"));
    for (double& w : weights) w = wrng.Uniform(1.0, 3.0);
  }
  s.routing = DeriveRouting(s.topology, weights);

  Rng irng(DeriveSeed(sample_seed, "intensity"));
  double intensity = irng.Uniform(cfg.intensity_range.first, cfg.intensity_range.second);
  s.traffic = GenTraffic(DeriveSeed(sample_seed, "traffic"), s.topology, intensity,
                         cfg.mean_packet_size);

  for (int halvings = 0;; ++halvings) {
    const auto fp = qt::ReducedLoadFixedPoint(s.topology, s.traffic, s.routing);
    if (qt::MaxBlocking(fp.links) <= cfg.max_loss) break;
    if (halvings == opts.max_halvings) {
      throw ScreeningFailed("sample " + std::to_string(index) + ": loss above " +
                            std::to_string(cfg.max_loss) + " after " +
                            std::to_string(opts.max_halvings) + " halvings");
    }
    intensity *= 0.5;
    for (Demand& d : s.traffic.demands) d.rate *= 0.5;
  }
  s.intensity = intensity;

  sim::SimConfig sim_cfg = opts.sim;
  sim_cfg.seed = DeriveSeed(sample_seed, "sim");
  LabelSample(s, opts.labeler, sim_cfg);
  return s;
}

}  // namespace twinforge::scenario

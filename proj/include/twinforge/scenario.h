#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twinforge/qt.h"
#include "twinforge/routing.h"
#include "twinforge/sim.h"
#include "twinforge/types.h"

namespace twinforge::scenario {

struct ScenarioConfig {
  std::pair<int, int> n_range{8, 12};
  double alpha = 0.8;
  double beta = 1.2;
  std::vector<double> capacity_set{10'000, 25'000, 40'000, 100'000};  // bits/s
  int buffer = 32;                                                   // packets
  std::pair<double, double> intensity_range{200.0, 3'000.0};         // bits/s per pair
  double max_loss = 0.03;
  double mean_packet_size = 1'000.0;  // bits
  std::uint64_t seed = 1;
};

/// Throws std::invalid_argument naming the offending field.
void ValidateConfig(const ScenarioConfig& cfg);

class ScreeningFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Labeler { kSimulator, kQt };

struct Sample {
  std::uint64_t index = 0;
  Topology topology;
  TrafficMatrix traffic;
  RoutingConfig routing;
  std::optional<PathMetrics> label;
  /// Per-pair intensity the traffic was scaled to, bits/s.
  double intensity = 0.0;
};

/// Power-law out-degree generator. Node i gets round(beta * x^-alpha) degree
/// credits with x uniform in (0, 1]; a random spanning tree is laid first and
/// the remaining credits become random non-duplicate edges. Each undirected
/// edge yields two directed links of equal capacity.
Topology GenTopology(std::uint64_t seed, const ScenarioConfig& cfg);

/// Rate intensity * u, u uniform in [0.1, 1], for every ordered pair, then
/// rescaled so the mean rate equals intensity.
TrafficMatrix GenTraffic(std::uint64_t seed, const Topology& topo, double intensity,
                         double mean_packet_size);

struct SampleOptions {
  Labeler labeler = Labeler::kSimulator;
  sim::SimConfig sim;  // seed is replaced by a per-sample derivation
  int max_halvings = 10;
};

/// Topology, routing (equal weights on even indices, random weights in [1, 3]
/// on odd ones), traffic screened by the analytical model against
/// cfg.max_loss, then labeled. Pure in (cfg.seed, index).
Sample GenSample(std::uint64_t index, const ScenarioConfig& cfg, const SampleOptions& opts);

/// Labels a sample in place.
void LabelSample(Sample& s, Labeler labeler, const sim::SimConfig& sim_cfg);

}  // namespace twinforge::scenario

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <queue>

#include "helpers.h"
#include "oracles.h"
#include "twinforge/io.h"
#include "twinforge/scenario.h"

using namespace twinforge;
using scenario::ScenarioConfig;

namespace {

// Mean slope over seeds 0..49 at n=1000, alpha=0.8, beta=1.2 from
// tests/oracles/plod_reference.py.
constexpr double kReferenceSlope = -1.7503;

bool ReachesAll(const Topology& t, NodeId from) {
  std::vector<bool> seen(t.nodes, false);
  std::queue<NodeId> q;
  q.push(from);
  seen[from] = true;
  const auto out = t.OutLinks();
  int count = 1;
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (LinkId id : out[u]) {
      const NodeId v = t.links[id].dst;
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == t.nodes;
}

}  // namespace

TEST_CASE("two-node topology is a single edge") {
  ScenarioConfig cfg;
  cfg.n_range = {2, 2};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Topology t = scenario::GenTopology(seed, cfg);
    CHECK(t.nodes == 2);
    REQUIRE(t.links.size() == 2);
    CHECK(t.links[0].src == t.links[1].dst);
    CHECK(t.links[0].dst == t.links[1].src);
  }
}

TEST_CASE("config validation names the field") {
  ScenarioConfig cfg;
  cfg.n_range = {1, 4};
  CHECK_THROWS_WITH_AS(scenario::GenTopology(1, cfg), doctest::Contains("n_range"),
                       std::invalid_argument);
  cfg = {};
  cfg.alpha = -1.0;
  CHECK_THROWS_WITH_AS(scenario::ValidateConfig(cfg), doctest::Contains("alpha"),
                       std::invalid_argument);
  cfg = {};
  cfg.max_loss = 1.0;
  CHECK_THROWS_WITH_AS(scenario::ValidateConfig(cfg), doctest::Contains("max_loss"),
                       std::invalid_argument);
  cfg = {};
  cfg.capacity_set.clear();
  CHECK_THROWS_WITH_AS(scenario::ValidateConfig(cfg), doctest::Contains("capacity_set"),
                       std::invalid_argument);
  cfg = {};
  cfg.intensity_range = {10.0, 5.0};
  CHECK_THROWS_WITH_AS(scenario::ValidateConfig(cfg), doctest::Contains("intensity_range"),
                       std::invalid_argument);
}

TEST_CASE("generated topologies are valid, connected, symmetric and deterministic") {
  ScenarioConfig cfg;
  cfg.n_range = {5, 40};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Topology t = scenario::GenTopology(seed, cfg);
    CHECK(t == scenario::GenTopology(seed, cfg));
    CHECK(t.nodes >= 5);
    CHECK(t.nodes <= 40);
    CHECK_NOTHROW(ValidateTopology(t));
    for (NodeId u = 0; u < t.nodes; ++u) CHECK(ReachesAll(t, u));
    CHECK(IsStronglyConnected(t));
    for (std::size_t i = 0; i < t.links.size(); i += 2) {
      CHECK(t.links[i].capacity == t.links[i + 1].capacity);
      CHECK(t.links[i].buffer == cfg.buffer);
      CHECK(std::find(cfg.capacity_set.begin(), cfg.capacity_set.end(), t.links[i].capacity) !=
            cfg.capacity_set.end());
    }
  }
}

TEST_CASE("node counts cover the configured range") {
  ScenarioConfig cfg;
  cfg.n_range = {8, 10};
  std::map<int, int> hist;
  for (std::uint64_t seed = 0; seed < 300; ++seed) ++hist[scenario::GenTopology(seed, cfg).nodes];
  CHECK(hist.size() == 3);
  for (auto [n, c] : hist) CHECK(c > 60);
}

TEST_CASE("out-degree distribution follows the reference power-law fit") {
  ScenarioConfig cfg;
  cfg.n_range = {1000, 1000};
  cfg.alpha = 0.8;
  cfg.beta = 1.2;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Topology t = scenario::GenTopology(seed, cfg);
    std::vector<int> deg(t.nodes, 0);
    for (const Link& l : t.links) ++deg[l.src];
    const double s = oracle::PowerLawSlope(deg);
    CHECK(s < 0.0);
    sum += s;
  }
  const double mean = sum / 50.0;
  MESSAGE("mean slope " << mean);
  CHECK(std::abs(mean - kReferenceSlope) <= 0.4);
}

TEST_CASE("traffic mean equals intensity and rates stay bounded") {
  ScenarioConfig cfg;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Topology t = scenario::GenTopology(seed, cfg);
    const double intensity = 100.0 + 50.0 * static_cast<double>(seed);
    const auto tm = scenario::GenTraffic(seed, t, intensity, 1000.0);
    CHECK(tm == scenario::GenTraffic(seed, t, intensity, 1000.0));
    REQUIRE(tm.demands.size() == static_cast<std::size_t>(t.nodes * (t.nodes - 1)));
    double sum = 0.0;
    for (const Demand& d : tm.demands) {
      CHECK(d.src != d.dst);
      CHECK(d.rate >= 0.0);
      CHECK(d.rate <= 10.0 * intensity);
      sum += d.rate;
    }
    const double mean = sum / static_cast<double>(tm.demands.size());
    CHECK(std::abs(mean - intensity) <= 1e-9 * intensity);
    CHECK_NOTHROW(ValidateTraffic(tm, t.nodes));
  }
  CHECK_THROWS_AS(scenario::GenTraffic(1, scenario::GenTopology(1, cfg), 0.0, 1000.0),
                  std::invalid_argument);
}

TEST_CASE("emitted samples pass screening and alternate routing") {
  ScenarioConfig cfg;
  cfg.seed = 7;
  cfg.intensity_range = {2'000.0, 20'000.0};  // forces halvings on most samples
  scenario::SampleOptions opts;
  opts.labeler = scenario::Labeler::kQt;
  int halved = 0;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const auto s = scenario::GenSample(i, cfg, opts);
    const auto fp = qt::ReducedLoadFixedPoint(s.topology, s.traffic, s.routing);
    CHECK(qt::MaxBlocking(fp.links) <= cfg.max_loss);
    REQUIRE(s.label);
    CHECK(s.label->size() == s.traffic.demands.size());
    const bool equal = std::all_of(s.routing.weights().begin(), s.routing.weights().end(),
                                   [](double w) { return w == 1.0; });
    CHECK(equal == (i % 2 == 0));
    if (s.intensity < cfg.intensity_range.first) ++halved;
  }
  CHECK(halved > 0);
}

TEST_CASE("unreachable loss cap raises ScreeningFailed") {
  ScenarioConfig cfg;
  cfg.intensity_range = {1e9, 1e9};
  scenario::SampleOptions opts;
  opts.labeler = scenario::Labeler::kQt;
  CHECK_THROWS_AS(scenario::GenSample(0, cfg, opts), scenario::ScreeningFailed);
}

TEST_CASE("near-zero load labels equal the sum of transmission times") {
  ScenarioConfig cfg;
  cfg.intensity_range = {1e-6, 1e-6};
  scenario::SampleOptions opts;
  opts.labeler = scenario::Labeler::kQt;
  const auto s = scenario::GenSample(3, cfg, opts);
  CHECK(s.intensity == 1e-6);
  for (std::size_t p = 0; p < s.traffic.demands.size(); ++p) {
    const Demand& d = s.traffic.demands[p];
    double tx = 0.0;
    for (LinkId id : s.routing.LinksOfPath(d.src, d.dst)) {
      tx += s.traffic.mean_packet_size / s.topology.links[id].capacity;
    }
    CHECK((*s.label)[p].mean_delay == doctest::Approx(tx).epsilon(1e-6));
  }
}

TEST_CASE("a regenerated dataset serializes byte-identically") {
  ScenarioConfig cfg;
  cfg.n_range = {8, 10};
  cfg.seed = 99;
  scenario::SampleOptions opts;
  opts.labeler = scenario::Labeler::kSimulator;
  opts.sim.duration = 20.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto a = io::Dump(io::ToJson(scenario::GenSample(i, cfg, opts)));
    const auto b = io::Dump(io::ToJson(scenario::GenSample(i, cfg, opts)));
    CHECK(a == b);
  }
}

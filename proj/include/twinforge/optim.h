#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "twinforge/qt.h"
#include "twinforge/sim.h"
#include "twinforge/twin.h"
#include "twinforge/types.h"

namespace twinforge::optim {

enum class EvaluatorKind { kTwin, kQt };

/// Scores a routing by predicted mean path delay. Holds a twin model when
/// kind == kTwin.
struct Evaluator {
  EvaluatorKind kind = EvaluatorKind::kQt;
  const twin::TwinModel* model = nullptr;
  qt::FixedPointOptions qt_options;
};

/// Unweighted mean of per-path delays predicted for the routing derived
/// from `weights`.
double Fitness(std::span<const double> weights, const Topology& topo, const TrafficMatrix& tm,
               const Evaluator& evaluator);

struct EsConfig {
  int population = 32;  // even; population / 2 mirrored pairs
  double sigma = 0.1;
  double learning_rate = 0.05;
  int iterations = 300;
  std::uint64_t seed = 1;
  /// Stop after this many iterations without a new best; 0 disables.
  int patience = 50;
};

void ValidateEsConfig(const EsConfig& cfg);

struct TraceRow {
  int iteration = 0;
  double best_fitness = 0.0;     // seconds, best so far
  double mean_fitness = 0.0;     // seconds, population mean
};

struct OptimizationTrace {
  std::vector<TraceRow> rows;
  std::vector<double> best_weights;
  /// Search distribution mean after the last update.
  std::vector<double> final_mean;
  double initial_fitness = 0.0;  // equal-weight routing
  double best_fitness = 0.0;
  /// Simulator measurements of the best and the equal-weight routing, when
  /// a simulator config was supplied.
  std::optional<double> best_sim_delay;
  std::optional<double> baseline_sim_delay;
};

/// Raised when an evaluator call fails mid-search; carries the trace up to
/// the last completed iteration.
class EvaluatorFailure : public std::runtime_error {
 public:
  explicit EvaluatorFailure(const std::string& what, OptimizationTrace partial = {})
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const OptimizationTrace& partial() const { return partial_; }

 private:
  OptimizationTrace partial_;
};

/// Centered-rank utilities in [-0.5, 0.5], larger for larger fitness. Tied
/// values share the average of their ranks, so a flat landscape gives all
/// zeros.
std::vector<double> CenteredRanks(std::span<const double> fitness);

/// Natural-evolution-strategies search over link weights starting from all
/// ones, with mirrored sampling and rank shaping. Minimizes Fitness. When
/// `measure` is set, the best and the initial weights are re-measured on
/// the simulator at the end.
OptimizationTrace NesOptimize(const Topology& topo, const TrafficMatrix& tm,
                              const Evaluator& evaluator, const EsConfig& cfg,
                              const std::optional<sim::SimConfig>& measure = std::nullopt);

/// Mean simulated path delay of the routing derived from `weights`.
double SimulatedMeanDelay(std::span<const double> weights, const Topology& topo,
                          const TrafficMatrix& tm, const sim::SimConfig& cfg);

}  // namespace twinforge::optim

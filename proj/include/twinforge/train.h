#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "twinforge/scenario.h"
#include "twinforge/twin.h"

namespace twinforge::twin {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;
  LossKind loss_kind = LossKind::kMape;
};

void ValidateTrainConfig(const TrainConfig& cfg);

class DivergedLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean of the epoch's batch losses
  double val_loss = 0.0;
};

struct TrainResult {
  TwinModel model;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Adam (0.9, 0.999, 1e-8) over seeded shuffled mini-batches. Normalization
/// constants are computed from the training split and frozen into the model.
/// Single-threaded and bitwise reproducible for a given seed.
TrainResult Train(std::span<const scenario::Sample> dataset, const TwinParameters& init,
                  const TrainConfig& cfg);

/// Mean loss over the usable paths of `examples`.
double DatasetLoss(const TwinModel& model, std::span<const Example> examples, LossKind kind);

struct EvalResult {
  double mape = 0.0;
  double p15 = 0.0;
  double p85 = 0.0;
  std::size_t paths = 0;
};

/// Linear-interpolated percentile (q in [0, 1]) of unsorted values.
double Percentile(std::vector<double> values, double q);

/// MAPE and 15th/85th percentile of per-path absolute percentage error.
EvalResult SummarizeErrors(std::span<const double> ape);

/// Absolute percentage errors of predictions against labels, skipping paths
/// whose label delay is not positive.
std::vector<double> PathErrors(std::span<const double> pred, const PathMetrics& label);

/// Twin predictions for every sample. `jobs` > 1 evaluates samples on worker
/// threads; results do not depend on it.
std::vector<std::vector<double>> PredictAll(const TwinModel& model,
                                            std::span<const scenario::Sample> dataset,
                                            int jobs = 1);

EvalResult Evaluate(const TwinModel& model, std::span<const scenario::Sample> dataset,
                    int jobs = 1);

}  // namespace twinforge::twin

#include "twinforge/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "twinforge/parallel.h"
#include "twinforge/rng.h"

namespace twinforge::twin {

void ValidateTrainConfig(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw std::invalid_argument("train: validation_fraction must be in (0, 1)");
  }
}

double DatasetLoss(const TwinModel& model, std::span<const Example> examples, LossKind kind) {
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<double> pu, lu;
  for (const Example& ex : examples) {
    const auto pred = Forward(model, ex.input);
    pu.clear();
    lu.clear();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!ex.usable[i]) continue;
      pu.push_back(pred[i]);
      lu.push_back(ex.label[i]);
    }
    sum += Loss(pu, lu, kind) * static_cast<double>(pu.size());
    count += pu.size();
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

namespace {

void Shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.UniformInt(0, static_cast<std::int64_t>(i) - 1))]);
  }
}

class Adam {
 public:
  explicit Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void Step(std::vector<double>& x, const std::vector<double>& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g[i] * g[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      x[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace

TrainResult Train(std::span<const scenario::Sample> dataset, const TwinParameters& init,
                  const TrainConfig& cfg) {
  ValidateTrainConfig(cfg);
  if (dataset.size() < 2) throw std::invalid_argument("train: need at least 2 samples");

  Rng rng(DeriveSeed(cfg.seed, "train"));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Shuffle(order, rng);
  auto n_val = static_cast<std::size_t>(
      std::lround(cfg.validation_fraction * static_cast<double>(dataset.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, dataset.size() - 1);
  const std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::sort(train_idx.begin(), train_idx.end());

  std::vector<scenario::Sample> train_samples;
  train_samples.reserve(train_idx.size());
  for (std::size_t i : train_idx) train_samples.push_back(dataset[i]);

  TrainResult result;
  TwinModel model{init, ComputeNormalization(train_samples)};
  std::vector<Example> train_ex, val_ex;
  for (const auto& s : train_samples) train_ex.push_back(MakeExample(s, model.norm));
  for (std::size_t i : val_idx) val_ex.push_back(MakeExample(dataset[i], model.norm));
  train_samples.clear();

  Adam adam(model.params.size(), cfg.learning_rate);
  TwinParameters grad(model.params.hyper());
  std::vector<std::size_t> perm(train_ex.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<const Example*> batch;
  double best = std::numeric_limits<double>::infinity();
  result.model = model;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Shuffle(perm, rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < perm.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(perm.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = train_ex[perm[k]];
        if (std::find(ex.usable.begin(), ex.usable.end(), true) != ex.usable.end()) {
          batch.push_back(&ex);
        }
      }
      if (batch.empty()) continue;
      std::fill(grad.flat().begin(), grad.flat().end(), 0.0);
      const double loss = LossAndGradient(model, batch, cfg.loss_kind, grad);
      if (!std::isfinite(loss)) {
        throw DivergedLoss("training loss became non-finite in epoch " + std::to_string(epoch));
      }
      adam.Step(model.params.flat(), grad.flat());
      loss_sum += loss;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    rec.val_loss = DatasetLoss(model, val_ex, cfg.loss_kind);
    if (!std::isfinite(rec.val_loss)) {
      throw DivergedLoss("validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

EvalResult SummarizeErrors(std::span<const double> ape) {
  EvalResult r;
  r.paths = ape.size();
  if (ape.empty()) return r;
  r.mape = std::accumulate(ape.begin(), ape.end(), 0.0) / static_cast<double>(ape.size());
  std::vector<double> v(ape.begin(), ape.end());
  r.p15 = Percentile(v, 0.15);
  r.p85 = Percentile(std::move(v), 0.85);
  return r;
}

std::vector<double> PathErrors(std::span<const double> pred, const PathMetrics& label) {
  if (pred.size() != label.size()) throw std::invalid_argument("errors: size mismatch");
  std::vector<double> ape;
  ape.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double truth = label[i].mean_delay;
    if (truth > 0.0) ape.push_back(std::abs(pred[i] - truth) / truth);
  }
  return ape;
}

std::vector<std::vector<double>> PredictAll(const TwinModel& model,
                                            std::span<const scenario::Sample> dataset,
                                            int jobs) {
  std::vector<std::vector<double>> out(dataset.size());
  ParallelFor(dataset.size(), jobs, [&](std::size_t i) {
    out[i] = Forward(model, MakeInput(dataset[i], model.norm));
  });
  return out;
}

EvalResult Evaluate(const TwinModel& model, std::span<const scenario::Sample> dataset, int jobs) {
  const auto preds = PredictAll(model, dataset, jobs);
  std::vector<double> ape;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].label) throw std::invalid_argument("evaluate: sample is not labelled");
    const auto e = PathErrors(preds[i], *dataset[i].label);
    ape.insert(ape.end(), e.begin(), e.end());
  }
  return SummarizeErrors(ape);
}

}  // namespace twinforge::twin

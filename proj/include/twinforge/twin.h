#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinforge/scenario.h"
#include "twinforge/types.h"

namespace twinforge::twin {

enum class Mode { kMessagePassing, kRnnBaseline };

std::string_view ModeName(Mode mode);
Mode ParseMode(std::string_view name);

struct Hyper {
  int hidden = 32;      // state width d
  int iterations = 8;   // message-passing rounds T
  Mode mode = Mode::kMessagePassing;
};

/// Named tensors of the model. Storage is one flat vector so optimizers and
/// finite-difference checks can treat the parameters as a single point.
enum TensorId : int {
  kLinkEncW, kLinkEncB,
  kPathEncW, kPathEncB,
  kPathWz, kPathUz, kPathBz,
  kPathWr, kPathUr, kPathBr,
  kPathWn, kPathUn, kPathBn,
  kLinkWz, kLinkUz, kLinkBz,
  kLinkWr, kLinkUr, kLinkBr,
  kLinkWn, kLinkUn, kLinkBn,
  kReadW1, kReadB1,
  kReadW2, kReadB2,
  kNumTensors
};

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

class TwinParameters {
 public:
  TwinParameters() = default;
  /// Zero-filled parameters with the layout implied by `hyper`.
  explicit TwinParameters(const Hyper& hyper);

  const Hyper& hyper() const { return hyper_; }
  const std::vector<TensorInfo>& layout() const { return layout_; }
  const TensorInfo& info(TensorId id) const { return layout_[id]; }

  std::span<double> tensor(TensorId id) {
    return {data_.data() + layout_[id].offset, layout_[id].size()};
  }
  std::span<const double> tensor(TensorId id) const {
    return {data_.data() + layout_[id].offset, layout_[id].size()};
  }

  std::vector<double>& flat() { return data_; }
  const std::vector<double>& flat() const { return data_; }
  std::size_t size() const { return data_.size(); }

  /// Name of the tensor owning flat index i.
  const std::string& NameOf(std::size_t i) const;

  bool operator==(const TwinParameters& o) const {
    return hyper_.hidden == o.hyper_.hidden && hyper_.iterations == o.hyper_.iterations &&
           hyper_.mode == o.hyper_.mode && data_ == o.data_;
  }

 private:
  Hyper hyper_;
  std::vector<TensorInfo> layout_;
  std::vector<double> data_;
};

/// Checks d >= 2, T >= 1, and T == 1 for the rnn baseline.
void ValidateHyper(const Hyper& hyper);

/// 13 d^2 + 14 d + 1.
std::size_t ParameterCount(int hidden);

/// Uniform in +-1/sqrt(fan_in); recurrent update-gate biases start at +1.
TwinParameters InitParams(std::uint64_t seed, Hyper hyper);

/// Feature scales frozen at training time and reused at inference.
struct Normalization {
  double capacity_max = 1.0;  // bits/s
  double rate_scale = 1.0;    // bits/s
  double hop_scale = 1.0;     // hops
  double delay_scale = 1.0;   // seconds, median training label delay

  bool operator==(const Normalization&) const = default;
};

struct TwinModel {
  TwinParameters params;
  Normalization norm;
};

class UnroutedDemand : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model-ready view of one sample: normalized features and per-demand link
/// sequences, in demand order.
struct TwinInput {
  std::vector<std::array<double, 2>> link_features;
  std::vector<std::array<double, 2>> path_features;
  std::vector<std::vector<LinkId>> path_links;
};

TwinInput MakeInput(const Topology& topo, const TrafficMatrix& tm,
                    const RoutingConfig& routing, const Normalization& norm);
TwinInput MakeInput(const scenario::Sample& sample, const Normalization& norm);

/// Intermediate values of one forward pass, consumed by Backward.
struct ForwardCache {
  std::vector<std::vector<double>> link_states;  // per round, links x d
  std::vector<std::vector<double>> path_states;  // per round, paths x d
  std::vector<std::vector<double>> messages;     // per round, links x d
  // Per round, per path step of the path cell.
  std::vector<std::vector<double>> path_h, path_z, path_r, path_un, path_n;
  // Per round of the link cell (message-passing mode only).
  std::vector<std::vector<double>> link_z, link_r, link_un, link_n;
  std::vector<double> readout_hidden;  // paths x d
  std::vector<double> raw;             // paths
};

/// Per-path delay predictions in seconds, always > 0. When `cache` is
/// non-null it is filled for Backward.
std::vector<double> Forward(const TwinModel& model, const TwinInput& input,
                            ForwardCache* cache = nullptr);

/// Accumulates d(objective)/d(params) into `grad` given d(objective)/d(pred).
void Backward(const TwinModel& model, const TwinInput& input, const ForwardCache& cache,
              std::span<const double> dpred, TwinParameters& grad);

enum class LossKind { kMape, kMseLogDelay };

std::string_view LossName(LossKind kind);
LossKind ParseLoss(std::string_view name);

/// Mean per-path loss. Throws std::invalid_argument on nonpositive labels or
/// size mismatch.
double Loss(std::span<const double> pred, std::span<const double> label, LossKind kind);

/// Derivative of the *sum* of per-path losses w.r.t. each prediction.
std::vector<double> LossGradient(std::span<const double> pred, std::span<const double> label,
                                 LossKind kind);

/// Labelled training example: input plus the label delays of usable paths.
struct Example {
  TwinInput input;
  std::vector<double> label;     // seconds, aligned with input paths
  std::vector<bool> usable;      // label > 0
};

Example MakeExample(const scenario::Sample& sample, const Normalization& norm);

/// Mean loss over the usable paths of a batch and its gradient. Throws
/// std::invalid_argument on an empty batch, NonFiniteGradient naming the
/// tensor on NaN/Inf.
double LossAndGradient(const TwinModel& model, std::span<const Example* const> batch,
                       LossKind kind, TwinParameters& grad);

/// Scales from a labelled dataset.
Normalization ComputeNormalization(std::span<const scenario::Sample> samples);

}  // namespace twinforge::twin

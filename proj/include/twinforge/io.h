#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinforge/optim.h"
#include "twinforge/scenario.h"
#include "twinforge/sim.h"
#include "twinforge/train.h"
#include "twinforge/twin.h"

namespace twinforge::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSampleFormat = "twinforge.sample/1";
inline constexpr const char* kModelFormat = "twinforge.model/1";

Json ToJson(const Topology& topo);
Topology TopologyFromJson(const Json& j);

Json ToJson(const TrafficMatrix& tm);
TrafficMatrix TrafficFromJson(const Json& j);

Json ToJson(const PathMetrics& metrics);
PathMetrics PathMetricsFromJson(const Json& j);

/// Routing is stored as its weight vector; paths are re-derived on load.
Json ToJson(const scenario::Sample& s);
scenario::Sample SampleFromJson(const Json& j);

Json ToJson(const scenario::ScenarioConfig& cfg);
/// Missing keys keep their defaults. Throws std::invalid_argument naming the
/// field on type errors or failed validation.
scenario::ScenarioConfig ScenarioConfigFromJson(const Json& j);

Json ToJson(const sim::SimConfig& cfg);
sim::SimConfig SimConfigFromJson(const Json& j, sim::SimConfig defaults = {});

Json ToJson(const twin::TrainConfig& cfg);
twin::TrainConfig TrainConfigFromJson(const Json& j, twin::TrainConfig defaults = {});

Json ToJson(const optim::EsConfig& cfg);
optim::EsConfig EsConfigFromJson(const Json& j, optim::EsConfig defaults = {});

Json ToJson(const qt::FixedPointOptions& opts);
qt::FixedPointOptions FixedPointOptionsFromJson(const Json& j, qt::FixedPointOptions defaults = {});

Json ToJson(const twin::Hyper& hyper);
twin::Hyper HyperFromJson(const Json& j, twin::Hyper defaults = {});

Json ToJson(const twin::TwinModel& model);
twin::TwinModel ModelFromJson(const Json& j);

/// Serialized text, terminated by a newline. Stable for identical inputs.
std::string Dump(const Json& j);
Json ReadJsonFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

scenario::Sample ReadSample(const std::filesystem::path& path);
void WriteSample(const std::filesystem::path& path, const scenario::Sample& s);

std::string SampleFileName(std::uint64_t index);

/// All sample_<i>.json files of a dataset directory, in index order.
std::vector<scenario::Sample> ReadDataset(const std::filesystem::path& dir);

twin::TwinModel ReadModel(const std::filesystem::path& path);
void WriteModel(const std::filesystem::path& path, const twin::TwinModel& model);

/// `src,dst,delay_s,loss` plus `delivered` when with_delivered.
std::string PathMetricsCsv(const PathMetrics& metrics, bool with_delivered);

std::string HistoryCsv(const std::vector<twin::EpochRecord>& history);
std::string TraceCsv(const optim::OptimizationTrace& trace);

/// Shortest decimal text that round-trips to the same double.
std::string FormatDouble(double v);

}  // namespace twinforge::io

#include "twinforge/io.h"

#include <charconv>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace twinforge::io {

namespace fs = std::filesystem;

namespace {

/// Reads j[key] as T when present, naming the field on failure.
template <typename T>
void Read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T Require(const Json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  T out{};
  Read(j, key, out);
  return out;
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json ToJson(const Topology& topo) {
  Json links = Json::array();
  for (const Link& l : topo.links) {
    links.push_back({{"src", l.src}, {"dst", l.dst}, {"capacity_bps", l.capacity},
                     {"buffer_pkts", l.buffer}});
  }
  return {{"nodes", topo.nodes}, {"links", std::move(links)}};
}

Topology TopologyFromJson(const Json& j) {
  Topology t;
  t.nodes = Require<int>(j, "nodes");
  for (const Json& l : j.at("links")) {
    t.links.push_back({Require<int>(l, "src"), Require<int>(l, "dst"),
                       Require<double>(l, "capacity_bps"), Require<int>(l, "buffer_pkts")});
  }
  ValidateTopology(t);
  return t;
}

Json ToJson(const TrafficMatrix& tm) {
  Json demands = Json::array();
  for (const Demand& d : tm.demands) {
    demands.push_back({{"src", d.src}, {"dst", d.dst}, {"rate_bps", d.rate}});
  }
  return {{"mean_packet_size_bits", tm.mean_packet_size}, {"demands", std::move(demands)}};
}

TrafficMatrix TrafficFromJson(const Json& j) {
  TrafficMatrix tm;
  tm.mean_packet_size = Require<double>(j, "mean_packet_size_bits");
  for (const Json& d : j.at("demands")) {
    tm.demands.push_back(
        {Require<int>(d, "src"), Require<int>(d, "dst"), Require<double>(d, "rate_bps")});
  }
  return tm;
}

Json ToJson(const PathMetrics& metrics) {
  Json paths = Json::array();
  for (const PathMetric& m : metrics) {
    paths.push_back({{"src", m.src}, {"dst", m.dst}, {"delay_s", m.mean_delay},
                     {"loss", m.loss}, {"delivered", m.delivered}});
  }
  return paths;
}

PathMetrics PathMetricsFromJson(const Json& j) {
  PathMetrics out;
  for (const Json& p : j) {
    PathMetric m;
    m.src = Require<int>(p, "src");
    m.dst = Require<int>(p, "dst");
    m.mean_delay = Require<double>(p, "delay_s");
    m.loss = Require<double>(p, "loss");
    Read(p, "delivered", m.delivered);
    out.push_back(m);
  }
  return out;
}

Json ToJson(const scenario::Sample& s) {
  Json j;
  j["format"] = kSampleFormat;
  j["index"] = s.index;
  j["intensity_bps"] = s.intensity;
  j["topology"] = ToJson(s.topology);
  j["traffic"] = ToJson(s.traffic);
  j["routing"] = {{"weights", s.routing.weights()}};
  j["label"] = s.label ? Json{{"paths", ToJson(*s.label)}} : Json(nullptr);
  return j;
}

scenario::Sample SampleFromJson(const Json& j) {
  if (j.value("format", "") != kSampleFormat) {
    throw std::invalid_argument("sample: unsupported format tag");
  }
  scenario::Sample s;
  Read(j, "index", s.index);
  Read(j, "intensity_bps", s.intensity);
  s.topology = TopologyFromJson(j.at("topology"));
  s.traffic = TrafficFromJson(j.at("traffic"));
  ValidateTraffic(s.traffic, s.topology.nodes);
  const auto weights = Require<std::vector<double>>(j.at("routing"), "weights");
  s.routing = DeriveRouting(s.topology, weights);
  if (j.contains("label") && !j.at("label").is_null()) {
    s.label = PathMetricsFromJson(j.at("label").at("paths"));
    if (s.label->size() != s.traffic.demands.size()) {
      throw std::invalid_argument("sample: label does not match demands");
    }
  }
  return s;
}

Json ToJson(const scenario::ScenarioConfig& cfg) {
  return {{"n_range", {cfg.n_range.first, cfg.n_range.second}},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"capacity_set", cfg.capacity_set},
          {"buffer", cfg.buffer},
          {"intensity_range", {cfg.intensity_range.first, cfg.intensity_range.second}},
          {"max_loss", cfg.max_loss},
          {"mean_packet_size", cfg.mean_packet_size},
          {"seed", cfg.seed}};
}

scenario::ScenarioConfig ScenarioConfigFromJson(const Json& j) {
  scenario::ScenarioConfig cfg;
  Read(j, "n_range", cfg.n_range);
  Read(j, "alpha", cfg.alpha);
  Read(j, "beta", cfg.beta);
  Read(j, "capacity_set", cfg.capacity_set);
  Read(j, "buffer", cfg.buffer);
  Read(j, "intensity_range", cfg.intensity_range);
  Read(j, "max_loss", cfg.max_loss);
  Read(j, "mean_packet_size", cfg.mean_packet_size);
  Read(j, "seed", cfg.seed);
  scenario::ValidateConfig(cfg);
  return cfg;
}

Json ToJson(const sim::SimConfig& cfg) {
  return {{"warmup", cfg.warmup},
          {"duration", cfg.duration},
          {"seed", cfg.seed},
          {"propagation_delay", cfg.propagation_delay}};
}

sim::SimConfig SimConfigFromJson(const Json& j, sim::SimConfig cfg) {
  Read(j, "warmup", cfg.warmup);
  Read(j, "duration", cfg.duration);
  Read(j, "seed", cfg.seed);
  Read(j, "propagation_delay", cfg.propagation_delay);
  sim::ValidateSimConfig(cfg);
  return cfg;
}

Json ToJson(const twin::TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"seed", cfg.seed},
          {"validation_fraction", cfg.validation_fraction},
          {"loss_kind", std::string(twin::LossName(cfg.loss_kind))}};
}

twin::TrainConfig TrainConfigFromJson(const Json& j, twin::TrainConfig cfg) {
  Read(j, "epochs", cfg.epochs);
  Read(j, "batch_size", cfg.batch_size);
  Read(j, "learning_rate", cfg.learning_rate);
  Read(j, "seed", cfg.seed);
  Read(j, "validation_fraction", cfg.validation_fraction);
  std::string loss(twin::LossName(cfg.loss_kind));
  Read(j, "loss_kind", loss);
  cfg.loss_kind = twin::ParseLoss(loss);
  twin::ValidateTrainConfig(cfg);
  return cfg;
}

Json ToJson(const optim::EsConfig& cfg) {
  return {{"population", cfg.population},
          {"sigma", cfg.sigma},
          {"learning_rate", cfg.learning_rate},
          {"iterations", cfg.iterations},
          {"seed", cfg.seed},
          {"patience", cfg.patience}};
}

optim::EsConfig EsConfigFromJson(const Json& j, optim::EsConfig cfg) {
  Read(j, "population", cfg.population);
  Read(j, "sigma", cfg.sigma);
  Read(j, "learning_rate", cfg.learning_rate);
  Read(j, "iterations", cfg.iterations);
  Read(j, "seed", cfg.seed);
  Read(j, "patience", cfg.patience);
  optim::ValidateEsConfig(cfg);
  return cfg;
}

Json ToJson(const qt::FixedPointOptions& opts) {
  return {{"tol", opts.tol},
          {"max_iter", opts.max_iter},
          {"damping", opts.damping},
          {"thinning", opts.thinning},
          {"propagation_delay", opts.propagation_delay}};
}

qt::FixedPointOptions FixedPointOptionsFromJson(const Json& j, qt::FixedPointOptions opts) {
  Read(j, "tol", opts.tol);
  Read(j, "max_iter", opts.max_iter);
  Read(j, "damping", opts.damping);
  Read(j, "thinning", opts.thinning);
  Read(j, "propagation_delay", opts.propagation_delay);
  qt::ValidateFixedPointOptions(opts);
  return opts;
}

Json ToJson(const twin::Hyper& hyper) {
  return {{"hidden", hyper.hidden},
          {"iterations", hyper.iterations},
          {"mode", std::string(twin::ModeName(hyper.mode))}};
}

twin::Hyper HyperFromJson(const Json& j, twin::Hyper hyper) {
  Read(j, "hidden", hyper.hidden);
  Read(j, "iterations", hyper.iterations);
  std::string mode(twin::ModeName(hyper.mode));
  Read(j, "mode", mode);
  hyper.mode = twin::ParseMode(mode);
  twin::ValidateHyper(hyper);
  return hyper;
}

Json ToJson(const twin::TwinModel& model) {
  const auto& p = model.params;
  Json tensors = Json::object();
  for (int id = 0; id < twin::kNumTensors; ++id) {
    const auto& info = p.info(static_cast<twin::TensorId>(id));
    const auto t = p.tensor(static_cast<twin::TensorId>(id));
    tensors[info.name] = {{"shape", {info.rows, info.cols}},
                          {"values", std::vector<double>(t.begin(), t.end())}};
  }
  return {{"format", kModelFormat},
          {"hyper", ToJson(p.hyper())},
          {"normalization",
           {{"capacity_max_bps", model.norm.capacity_max},
            {"rate_scale_bps", model.norm.rate_scale},
            {"hop_scale", model.norm.hop_scale},
            {"delay_scale_s", model.norm.delay_scale}}},
          {"tensors", std::move(tensors)}};
}

twin::TwinModel ModelFromJson(const Json& j) {
  if (j.value("format", "") != kModelFormat) {
    throw std::invalid_argument("model: unsupported format tag");
  }
  const Json& h = j.at("hyper");
  twin::Hyper hyper;
  hyper.hidden = Require<int>(h, "hidden");
  hyper.iterations = Require<int>(h, "iterations");
  hyper.mode = twin::ParseMode(Require<std::string>(h, "mode"));
  twin::ValidateHyper(hyper);
  twin::TwinModel m{twin::TwinParameters(hyper), {}};
  const Json& n = j.at("normalization");
  m.norm.capacity_max = Require<double>(n, "capacity_max_bps");
  m.norm.rate_scale = Require<double>(n, "rate_scale_bps");
  m.norm.hop_scale = Require<double>(n, "hop_scale");
  m.norm.delay_scale = Require<double>(n, "delay_scale_s");
  const Json& tensors = j.at("tensors");
  for (int id = 0; id < twin::kNumTensors; ++id) {
    const auto tid = static_cast<twin::TensorId>(id);
    const auto& info = m.params.info(tid);
    const auto values = Require<std::vector<double>>(tensors.at(info.name), "values");
    if (values.size() != info.size()) {
      throw std::invalid_argument("model: tensor " + info.name + " has wrong size");
    }
    std::copy(values.begin(), values.end(), m.params.tensor(tid).begin());
  }
  return m;
}

std::string Dump(const Json& j) { return j.dump(1) + "\n"; }

Json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

scenario::Sample ReadSample(const fs::path& path) { return SampleFromJson(ReadJsonFile(path)); }

void WriteSample(const fs::path& path, const scenario::Sample& s) {
  WriteTextFile(path, Dump(ToJson(s)));
}

std::string SampleFileName(std::uint64_t index) {
  return "sample_" + std::to_string(index) + ".json";
}

std::vector<scenario::Sample> ReadDataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  static const std::regex kName(R"(sample_(\d+)\.json)");
  std::map<std::uint64_t, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kName)) files[std::stoull(m[1].str())] = entry.path();
  }
  std::vector<scenario::Sample> out;
  out.reserve(files.size());
  for (const auto& [index, path] : files) out.push_back(ReadSample(path));
  return out;
}

twin::TwinModel ReadModel(const fs::path& path) { return ModelFromJson(ReadJsonFile(path)); }

void WriteModel(const fs::path& path, const twin::TwinModel& model) {
  WriteTextFile(path, Dump(ToJson(model)));
}

std::string PathMetricsCsv(const PathMetrics& metrics, bool with_delivered) {
  std::ostringstream os;
  os << "src,dst,delay_s,loss" << (with_delivered ? ",delivered" : "") << "\n";
  for (const PathMetric& m : metrics) {
    os << m.src << ',' << m.dst << ',' << FormatDouble(m.mean_delay) << ','
       << FormatDouble(m.loss);
    if (with_delivered) os << ',' << m.delivered;
    os << "\n";
  }
  return os.str();
}

std::string HistoryCsv(const std::vector<twin::EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << FormatDouble(r.train_loss) << ',' << FormatDouble(r.val_loss) << "\n";
  }
  return os.str();
}

std::string TraceCsv(const optim::OptimizationTrace& trace) {
  std::ostringstream os;
  os << "iter,best_delay_s,mean_delay_s\n";
  for (const auto& r : trace.rows) {
    os << r.iteration << ',' << FormatDouble(r.best_fitness) << ','
       << FormatDouble(r.mean_fitness) << "\n";
  }
  return os.str();
}

}  // namespace twinforge::io

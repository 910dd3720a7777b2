#include "commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "manifest.h"
#include "twinforge/optim.h"
#include "twinforge/parallel.h"
#include "twinforge/qt.h"
#include "twinforge/rng.h"
#include "twinforge/sim.h"
#include "twinforge/train.h"

namespace twinforge::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

// Above this many estimated simulator events a run is likely to take hours.
constexpr double kEventWarnThreshold = 2e9;

using Runner = std::function<void(const fs::path& out, int jobs)>;

const Json& Section(const Json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg.at(key).is_object()) {
    throw ConfigError(std::string("config: field '") + key + "' must be an object");
  }
  return cfg.at(key);
}

template <typename T>
T Field(const Json& cfg, const char* key) {
  if (!cfg.contains(key)) throw ConfigError(std::string("config: missing field '") + key + "'");
  try {
    return cfg.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

/// Runs a library parser, turning its validation errors into ConfigError.
template <typename Fn>
auto Checked(const char* section, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + section + ": " + e.what());
  }
}

fs::path InputPath(const Json& cfg, const char* key) {
  const auto p = Field<std::string>(cfg, key);
  if (p.empty()) throw ConfigError(std::string("config: field '") + key + "' is required");
  if (!fs::exists(p)) throw ConfigError(std::string("config: field '") + key + "': no such file " + p);
  return p;
}

scenario::Sample LoadSample(const Json& cfg) {
  const fs::path p = InputPath(cfg, "sample");
  return Checked("sample", [&] { return io::ReadSample(p); });
}

twin::TwinModel LoadModel(const fs::path& p) {
  if (!fs::exists(p)) throw ConfigError("config: no such model file " + p.string());
  return Checked("model", [&] { return io::ReadModel(p); });
}

std::vector<scenario::Sample> LoadDataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("config: dataset is not a directory: " + dir);
  auto data = Checked("dataset", [&] { return io::ReadDataset(dir); });
  if (data.empty()) throw ConfigError("config: dataset has no samples: " + dir);
  return data;
}

std::string Csv(double v) { return io::FormatDouble(v); }

void Say(const std::string& text) { std::cout << text << std::flush; }

double MeanRate(const TrafficMatrix& tm) {
  if (tm.demands.empty()) return 0.0;
  double sum = 0.0;
  for (const Demand& d : tm.demands) sum += d.rate;
  return sum / static_cast<double>(tm.demands.size());
}

void WarnIfLong(double events) {
  if (events > kEventWarnThreshold) {
    std::cerr << "warning: simulation estimated at " << events
              << " events; this may take hours\n";
  }
}

// ---------------------------------------------------------------------------
// gen-dataset

Runner PrepareGenDataset(const Json& cfg) {
  const auto scen = Checked("scenario", [&] { return io::ScenarioConfigFromJson(Section(cfg, "scenario")); });
  const auto count = Field<std::int64_t>(cfg, "count");
  if (count < 1) throw ConfigError("config: field 'count' must be >= 1");
  const auto labeler = Field<std::string>(cfg, "labeler");
  scenario::SampleOptions opts;
  if (labeler == "sim") {
    opts.labeler = scenario::Labeler::kSimulator;
  } else if (labeler == "qt") {
    opts.labeler = scenario::Labeler::kQt;
  } else {
    throw ConfigError("config: field 'labeler' must be 'sim' or 'qt'");
  }
  opts.sim = Checked("sim", [&] { return io::SimConfigFromJson(Section(cfg, "sim")); });
  opts.max_halvings = Field<int>(cfg, "max_halvings");
  if (opts.max_halvings < 0) throw ConfigError("config: field 'max_halvings' must be >= 0");

  return [=](const fs::path& out, int jobs) {
    ParallelFor(static_cast<std::size_t>(count), jobs, [&](std::size_t i) {
      const auto s = scenario::GenSample(i, scen, opts);
      io::WriteSample(out / io::SampleFileName(i), s);
    });
    Say("wrote " + std::to_string(count) + " samples\n");
  };
}

// ---------------------------------------------------------------------------
// train

Runner PrepareTrain(const Json& cfg) {
  const auto dirs = Field<std::vector<std::string>>(cfg, "datasets");
  if (dirs.empty()) throw ConfigError("config: field 'datasets' needs at least one directory");
  const auto hyper = Checked("hyper", [&] { return io::HyperFromJson(Section(cfg, "hyper")); });
  const auto tc = Checked("train", [&] { return io::TrainConfigFromJson(Section(cfg, "train")); });
  auto data = std::make_shared<std::vector<scenario::Sample>>();
  for (const auto& d : dirs) {
    auto part = LoadDataset(d);
    for (auto& s : part) {
      if (!s.label) throw ConfigError("config: dataset " + d + " has unlabelled samples");
      data->push_back(std::move(s));
    }
  }
  if (data->size() < 2) throw ConfigError("config: training needs at least 2 samples");

  return [=](const fs::path& out, int) {
    const auto init = twin::InitParams(DeriveSeed(tc.seed, "init"), hyper);
    const auto r = twin::Train(*data, init, tc);
    io::WriteModel(out / "model.json", r.model);
    io::WriteTextFile(out / "history.csv", io::HistoryCsv(r.history));
    const auto& best = r.history[static_cast<std::size_t>(r.best_epoch - 1)];
    Say("best_epoch," + std::to_string(r.best_epoch) + "\nval_loss," + Csv(best.val_loss) +
        "\n");
  };
}

// ---------------------------------------------------------------------------
// eval

struct NamedModel {
  std::string name;
  twin::TwinModel model;
};

struct Bucket {
  std::string name;
  std::vector<scenario::Sample> data;
};

std::string NodeRange(const std::vector<scenario::Sample>& data) {
  int lo = data.front().topology.nodes, hi = lo;
  for (const auto& s : data) {
    lo = std::min(lo, s.topology.nodes);
    hi = std::max(hi, s.topology.nodes);
  }
  return std::to_string(lo) + "-" + std::to_string(hi);
}

Runner PrepareEval(const Json& cfg) {
  auto models = std::make_shared<std::vector<NamedModel>>();
  for (const Json& m : Field<Json>(cfg, "models")) {
    NamedModel nm;
    nm.name = Field<std::string>(m, "name");
    nm.model = LoadModel(Field<std::string>(m, "path"));
    if (nm.name.empty()) nm.name = std::string(twin::ModeName(nm.model.params.hyper().mode));
    models->push_back(std::move(nm));
  }
  const bool with_qt = Field<bool>(cfg, "qt");
  if (models->empty() && !with_qt) throw ConfigError("config: nothing to evaluate");
  auto buckets = std::make_shared<std::vector<Bucket>>();
  for (const Json& d : Field<Json>(cfg, "datasets")) {
    Bucket b;
    b.data = LoadDataset(Field<std::string>(d, "path"));
    for (const auto& s : b.data) {
      if (!s.label) throw ConfigError("config: evaluation datasets must be labelled");
    }
    b.name = Field<std::string>(d, "bucket");
    if (b.name.empty()) b.name = NodeRange(b.data);
    buckets->push_back(std::move(b));
  }
  if (buckets->empty()) throw ConfigError("config: field 'datasets' needs at least one entry");

  return [=](const fs::path& out, int jobs) {
    std::ostringstream summary, preds;
    summary << "model,size_bucket,mape,p15,p85\n";
    preds << "model,size_bucket,sample,src,dst,pred_delay_s,label_delay_s,ape\n";
    auto report = [&](const std::string& name, const Bucket& b,
                      const std::vector<std::vector<double>>& p) {
      std::vector<double> ape;
      for (std::size_t i = 0; i < b.data.size(); ++i) {
        const auto& label = *b.data[i].label;
        for (std::size_t k = 0; k < label.size(); ++k) {
          const double truth = label[k].mean_delay;
          if (!(truth > 0.0)) continue;
          const double e = std::abs(p[i][k] - truth) / truth;
          ape.push_back(e);
          preds << name << ',' << b.name << ',' << b.data[i].index << ',' << label[k].src << ','
                << label[k].dst << ',' << Csv(p[i][k]) << ',' << Csv(truth) << ',' << Csv(e)
                << "\n";
        }
      }
      const auto r = twin::SummarizeErrors(ape);
      summary << name << ',' << b.name << ',' << Csv(r.mape) << ',' << Csv(r.p15) << ','
              << Csv(r.p85) << "\n";
    };
    for (const auto& m : *models) {
      for (const auto& b : *buckets) report(m.name, b, twin::PredictAll(m.model, b.data, jobs));
    }
    if (with_qt) {
      for (const auto& b : *buckets) {
        std::vector<std::vector<double>> p(b.data.size());
        ParallelFor(b.data.size(), jobs, [&](std::size_t i) {
          const auto& s = b.data[i];
          for (const auto& m : qt::QtPathMetrics(s.topology, s.traffic, s.routing).paths) {
            p[i].push_back(m.mean_delay);
          }
        });
        report("qt", b, p);
      }
    }
    io::WriteTextFile(out / "eval.csv", summary.str());
    io::WriteTextFile(out / "predictions.csv", preds.str());
    Say(summary.str());
  };
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeCase {
  double intensity = 0.0;
  TrafficMatrix traffic;
  fs::path dir;
};

Runner PrepareOptimize(const Json& cfg) {
  const auto sample = std::make_shared<scenario::Sample>(LoadSample(cfg));
  const auto kind = Field<std::string>(cfg, "evaluator");
  auto model = std::make_shared<twin::TwinModel>();
  optim::Evaluator ev;
  if (kind == "twin") {
    *model = LoadModel(InputPath(cfg, "model"));
    ev.kind = optim::EvaluatorKind::kTwin;
    ev.model = model.get();
  } else if (kind == "qt") {
    ev.kind = optim::EvaluatorKind::kQt;
  } else {
    throw ConfigError("config: field 'evaluator' must be 'twin' or 'qt'");
  }
  const auto es = Checked("es", [&] { return io::EsConfigFromJson(Section(cfg, "es")); });
  const auto sim_cfg = Checked("sim", [&] { return io::SimConfigFromJson(Section(cfg, "sim")); });
  const bool measure = Field<bool>(cfg, "measure");
  const auto intensities = Field<std::vector<double>>(cfg, "intensities");
  for (double x : intensities) {
    if (!(x > 0.0)) throw ConfigError("config: field 'intensities' entries must be > 0");
  }

  // `ev` points into `model`, so the runner keeps it alive.
  return [=, model = model](const fs::path& out, int jobs) {
    std::vector<OptimizeCase> cases;
    if (intensities.empty()) {
      cases.push_back({MeanRate(sample->traffic), sample->traffic, out});
    } else {
      const double base = MeanRate(sample->traffic);
      for (std::size_t k = 0; k < intensities.size(); ++k) {
        OptimizeCase c{intensities[k], sample->traffic, out / ("intensity_" + std::to_string(k))};
        for (Demand& d : c.traffic.demands) d.rate *= intensities[k] / base;
        fs::create_directories(c.dir);
        cases.push_back(std::move(c));
      }
    }
    std::vector<optim::OptimizationTrace> traces(cases.size());
    ParallelFor(cases.size(), jobs, [&](std::size_t k) {
      traces[k] = optim::NesOptimize(sample->topology, cases[k].traffic, ev, es,
                                     measure ? std::optional(sim_cfg) : std::nullopt);
    });
    std::ostringstream summary;
    summary << "intensity_bps,equal_weight_delay_s,optimized_delay_s,reduction_s,"
               "relative_reduction,evaluator_equal_weight_s,evaluator_optimized_s\n";
    for (std::size_t k = 0; k < cases.size(); ++k) {
      const auto& t = traces[k];
      Json result{{"intensity_bps", cases[k].intensity},
                  {"evaluator", kind},
                  {"iterations", t.rows.back().iteration},
                  {"best_weights", t.best_weights},
                  {"evaluator_equal_weight_delay_s", t.initial_fitness},
                  {"evaluator_delay_s", t.best_fitness}};
      std::string sim_cols = ",,,";
      if (t.best_sim_delay && t.baseline_sim_delay) {
        const double base = *t.baseline_sim_delay, best = *t.best_sim_delay;
        const double ratio = base > 0.0 ? (base - best) / base : 0.0;
        result["sim_equal_weight_delay_s"] = base;
        result["sim_delay_s"] = best;
        result["improvement_ratio"] = ratio;
        sim_cols = Csv(base) + ',' + Csv(best) + ',' + Csv(base - best) + ',' + Csv(ratio);
      }
      io::WriteTextFile(cases[k].dir / "trace.csv", io::TraceCsv(t));
      io::WriteTextFile(cases[k].dir / "result.json", io::Dump(result));
      summary << Csv(cases[k].intensity) << ',' << sim_cols << ',' << Csv(t.initial_fitness)
              << ',' << Csv(t.best_fitness) << "\n";
    }
    io::WriteTextFile(out / "summary.csv", summary.str());
    Say(summary.str());
  };
}

// ---------------------------------------------------------------------------
// simulate / qt

Runner PrepareSimulate(const Json& cfg) {
  const auto sample = std::make_shared<scenario::Sample>(LoadSample(cfg));
  const auto sim_cfg = Checked("sim", [&] { return io::SimConfigFromJson(Section(cfg, "sim")); });
  return [=](const fs::path& out, int) {
    const double est = sim::EstimateEventCount(sim_cfg, sample->traffic,
                                               sim::MeanHops(sample->traffic, sample->routing));
    WarnIfLong(est);
    const auto r = sim::Simulate(sample->topology, sample->traffic, sample->routing, sim_cfg);
    const std::string csv = io::PathMetricsCsv(r.paths, true);
    io::WriteTextFile(out / "metrics.csv", csv);
    const Json stats{{"events", r.stats.events},
                     {"estimated_events", est},
                     {"injected", r.stats.injected},
                     {"delivered", r.stats.delivered},
                     {"dropped", r.stats.dropped},
                     {"in_flight_at_end", r.stats.in_flight_at_end}};
    io::WriteTextFile(out / "stats.json", io::Dump(stats));
    Say(csv);
  };
}

Runner PrepareQt(const Json& cfg) {
  const auto sample = std::make_shared<scenario::Sample>(LoadSample(cfg));
  const auto opts = Checked("qt", [&] { return io::FixedPointOptionsFromJson(Section(cfg, "qt")); });
  return [=](const fs::path& out, int) {
    const auto fp = qt::ReducedLoadFixedPoint(sample->topology, sample->traffic, sample->routing, opts);
    if (!fp.converged) {
      std::cerr << "warning: fixed point did not converge after " << fp.iterations
                << " iterations (residual " << fp.residual << ")\n";
    }
    const auto paths = qt::PathMetricsFromLinks(sample->topology, sample->traffic,
                                                sample->routing, fp.links, opts.propagation_delay);
    const std::string csv = io::PathMetricsCsv(paths.paths, false);
    io::WriteTextFile(out / "metrics.csv", csv);
    Json links = Json::array();
    for (std::size_t l = 0; l < fp.links.size(); ++l) {
      const auto& s = fp.links[l];
      links.push_back({{"link", l},
                       {"offered_load_pps", s.offered_load},
                       {"service_rate_pps", s.service_rate},
                       {"blocking", s.blocking},
                       {"mean_sojourn_s", s.mean_sojourn}});
    }
    const Json info{{"converged", fp.converged},
                    {"iterations", fp.iterations},
                    {"residual", fp.residual},
                    {"links", std::move(links)}};
    io::WriteTextFile(out / "fixed_point.json", io::Dump(info));
    Say(csv);
  };
}

// ---------------------------------------------------------------------------
// bench

template <typename Fn>
double MedianSeconds(int repeats, Fn&& fn) {
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

Runner PrepareBench(const Json& cfg) {
  const auto sample = std::make_shared<scenario::Sample>(LoadSample(cfg));
  const auto model = std::make_shared<twin::TwinModel>(LoadModel(InputPath(cfg, "model")));
  const int repeats = Field<int>(cfg, "repeats");
  if (repeats < 1) throw ConfigError("config: field 'repeats' must be >= 1");
  const bool with_sim = Field<bool>(cfg, "with_sim");
  const auto sim_cfg = Checked("sim", [&] { return io::SimConfigFromJson(Section(cfg, "sim")); });

  return [=](const fs::path& out, int) {
    const auto& s = *sample;
    double sink = 0.0;
    std::ostringstream csv;
    csv << "engine,median_s\n";
    csv << "twin," << Csv(MedianSeconds(repeats, [&] {
      const auto p = twin::Forward(*model, twin::MakeInput(s, model->norm));
      sink += p.front();
    })) << "\n";
    csv << "qt," << Csv(MedianSeconds(repeats, [&] {
      sink += qt::QtPathMetrics(s.topology, s.traffic, s.routing).paths.front().mean_delay;
    })) << "\n";
    if (with_sim) {
      csv << "sim," << Csv(MedianSeconds(repeats, [&] {
        sink += sim::Simulate(s.topology, s.traffic, s.routing, sim_cfg).paths.front().mean_delay;
      })) << "\n";
    }
    if (!std::isfinite(sink)) std::cerr << "warning: non-finite benchmark output\n";
    io::WriteTextFile(out / "bench.csv", csv.str());
    Say(csv.str());
  };
}

// ---------------------------------------------------------------------------

struct CommandDef {
  const char* name;
  std::function<Json()> defaults;
  const char* seed_pointer;
  std::function<Runner(const Json&)> prepare;
};

Json DefaultSim(double warmup, double duration) {
  sim::SimConfig s;
  s.warmup = warmup;
  s.duration = duration;
  return io::ToJson(s);
}

const std::vector<CommandDef>& Commands() {
  static const std::vector<CommandDef> defs = {
      {"gen-dataset",
       [] {
         return Json{{"scenario", io::ToJson(scenario::ScenarioConfig{})},
                     {"count", 100},
                     {"labeler", "sim"},
                     {"sim", DefaultSim(50.0, 2000.0)},
                     {"max_halvings", 10}};
       },
       "/scenario/seed", PrepareGenDataset},
      {"train",
       [] {
         return Json{{"datasets", Json::array()},
                     {"hyper", io::ToJson(twin::Hyper{})},
                     {"train", io::ToJson(twin::TrainConfig{})}};
       },
       "/train/seed", PrepareTrain},
      {"eval",
       [] { return Json{{"models", Json::array()}, {"qt", true}, {"datasets", Json::array()}}; },
       "", PrepareEval},
      {"optimize",
       [] {
         return Json{{"sample", ""},
                     {"evaluator", "twin"},
                     {"model", ""},
                     {"es", io::ToJson(optim::EsConfig{})},
                     {"intensities", Json::array()},
                     {"measure", true},
                     {"sim", DefaultSim(50.0, 1000.0)}};
       },
       "/es/seed", PrepareOptimize},
      {"simulate",
       [] { return Json{{"sample", ""}, {"sim", DefaultSim(50.0, 1000.0)}}; },
       "/sim/seed", PrepareSimulate},
      {"qt",
       [] { return Json{{"sample", ""}, {"qt", io::ToJson(qt::FixedPointOptions{})}}; },
       "", PrepareQt},
      {"bench",
       [] {
         return Json{{"model", ""},
                     {"sample", ""},
                     {"repeats", 5},
                     {"with_sim", false},
                     {"sim", DefaultSim(0.0, 60.0)}};
       },
       "/sim/seed", PrepareBench},
  };
  return defs;
}

const CommandDef& Find(const std::string& name) {
  for (const auto& c : Commands()) {
    if (name == c.name) return c;
  }
  throw ConfigError("unknown command '" + name + "'");
}

void PrepareOut(const fs::path& out, bool force) {
  if (out.empty()) throw ConfigError("--out is required");
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw ConfigError(out.string() + " exists and is not a directory");
    if (!fs::is_empty(out)) {
      if (!force) {
        throw ConfigError(out.string() + " is not empty; pass --force to replace it");
      }
      if (!fs::exists(out / kManifestName)) {
        throw ConfigError(out.string() + " is not an experiment directory (no " +
                          kManifestName + "); refusing to replace it");
      }
      fs::remove_all(out);
    }
  }
  fs::create_directories(out);
}

std::uint64_t SeedOf(const CommandDef& def, const Json& cfg) {
  if (std::string(def.seed_pointer).empty()) return 0;
  const Json::json_pointer ptr(def.seed_pointer);
  return cfg.contains(ptr) ? cfg.at(ptr).get<std::uint64_t>() : 0;
}

void WriteManifest(const fs::path& out, const Manifest& m) {
  io::WriteTextFile(out / kManifestName, io::Dump(ToJson(m)));
}

}  // namespace

std::vector<std::string> CommandNames() {
  std::vector<std::string> out;
  for (const auto& c : Commands()) out.emplace_back(c.name);
  return out;
}

Json DefaultConfig(const std::string& command) { return Find(command).defaults(); }

std::string SeedPointer(const std::string& command) { return Find(command).seed_pointer; }

int Execute(const std::string& command, const Json& cfg, const ExecOptions& opt) {
  const std::string tag = "twinforge " + command + ": ";
  Runner run;
  Manifest m;
  try {
    const CommandDef& def = Find(command);
    run = def.prepare(cfg);
    m.seed = SeedOf(def, cfg);
    PrepareOut(opt.out, opt.force);
  } catch (const std::exception& e) {
    std::cerr << tag << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  m.command = command;
  m.argv = opt.argv;
  m.config = cfg;
  m.started_at = UtcNow();
  try {
    // Provisional manifest, so a failed run still marks the directory as ours.
    WriteManifest(opt.out, m);
    run(opt.out, opt.jobs);
    m.finished_at = UtcNow();
    m.digests = DigestTree(opt.out);
    WriteManifest(opt.out, m);
  } catch (const std::exception& e) {
    std::cerr << tag << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int Rerun(const fs::path& manifest, const ExecOptions& opt) {
  Manifest m;
  try {
    m = ManifestFromJson(io::ReadJsonFile(manifest));
  } catch (const std::exception& e) {
    std::cerr << "twinforge rerun: error: " << e.what() << "\n";
    return kExitConfig;
  }
  const int rc = Execute(m.command, m.config, opt);
  if (rc != kExitOk) return rc;
  const auto now = DigestTree(opt.out);
  std::size_t differ = 0;
  for (const auto& [file, sha] : m.digests) {
    const auto it = now.find(file);
    if (it == now.end()) {
      std::cerr << "missing: " << file << "\n";
      ++differ;
    } else if (it->second != sha) {
      std::cerr << "differs: " << file << "\n";
      ++differ;
    }
  }
  for (const auto& [file, sha] : now) {
    if (!m.digests.count(file)) {
      std::cerr << "extra: " << file << "\n";
      ++differ;
    }
  }
  if (differ) {
    std::cerr << "twinforge rerun: " << differ << " output(s) differ from " << manifest << "\n";
    return kExitRuntime;
  }
  std::cerr << "twinforge rerun: " << now.size() << " outputs identical\n";
  return kExitOk;
}

}  // namespace twinforge::cli

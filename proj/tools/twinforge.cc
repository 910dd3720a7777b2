// twinforge: command-line front end. Every subcommand resolves a complete
// JSON config (defaults <- --config file <- TWINFORGE_SEED <- flags), runs
// it into --out and records it in manifest.json.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.h"
#include "manifest.h"
#include "twinforge/twin.h"

namespace fs = std::filesystem;
using twinforge::io::Json;
using namespace twinforge::cli;

namespace {

using Override = std::function<void(Json&)>;

struct Sub {
  std::string command;
  CLI::App* app = nullptr;
  std::string config_file;
  std::string out;
  bool force = false;
  int jobs = 1;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::vector<Override> overrides;
};

std::string Absolute(const std::string& p) {
  return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

template <typename T>
void Flag(Sub& s, const std::string& name, const std::string& pointer, const std::string& help) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = s.app->add_option(name, *value, help);
  s.overrides.push_back([value, opt, pointer](Json& cfg) {
    if (opt->count() > 0) cfg[Json::json_pointer(pointer)] = *value;
  });
}

void PathFlag(Sub& s, const std::string& name, const std::string& pointer,
              const std::string& help) {
  auto value = std::make_shared<std::string>();
  CLI::Option* opt = s.app->add_option(name, *value, help);
  s.overrides.push_back([value, opt, pointer](Json& cfg) {
    if (opt->count() > 0) cfg[Json::json_pointer(pointer)] = Absolute(*value);
  });
}

void BoolFlag(Sub& s, const std::string& name, const std::string& pointer, bool set_to,
              const std::string& help) {
  CLI::Option* opt = s.app->add_flag(name, help);
  s.overrides.push_back([opt, pointer, set_to](Json& cfg) {
    if (opt->count() > 0) cfg[Json::json_pointer(pointer)] = set_to;
  });
}

/// `[NAME=]PATH` entries into [{key: NAME, "path": PATH}].
void NamedPaths(Sub& s, const std::string& name, const std::string& field, const std::string& key,
                const std::string& help) {
  auto values = std::make_shared<std::vector<std::string>>();
  CLI::Option* opt = s.app->add_option(name, *values, help);
  s.overrides.push_back([values, opt, field, key](Json& cfg) {
    if (opt->count() == 0) return;
    Json list = Json::array();
    for (const auto& v : *values) {
      const auto eq = v.find('=');
      const std::string label = eq == std::string::npos ? "" : v.substr(0, eq);
      const std::string path = eq == std::string::npos ? v : v.substr(eq + 1);
      list.push_back({{key, label}, {"path", Absolute(path)}});
    }
    cfg[field] = std::move(list);
  });
}

Sub& AddSub(CLI::App& app, std::vector<std::unique_ptr<Sub>>& subs, const std::string& command,
            const std::string& description) {
  auto s = std::make_unique<Sub>();
  s->command = command;
  s->app = app.add_subcommand(command, description);
  s->app->add_option("--out", s->out, "Experiment output directory (created; must be empty)")
      ->required();
  s->app->add_option("--config", s->config_file,
                     "JSON config file; keys mirror the manifest 'config' section");
  s->app->add_flag("--force", s->force, "Replace an existing experiment directory");
  s->app->add_option("--jobs", s->jobs, "Worker threads for independent samples")
      ->check(CLI::PositiveNumber)
      ->default_val(1);
  if (!SeedPointer(command).empty()) {
    s->seed_opt = s->app->add_option("--seed", s->seed,
                                     "Seed (overrides TWINFORGE_SEED and the config file)");
  }
  subs.push_back(std::move(s));
  return *subs.back();
}

/// Rejects config-file keys that the command does not know, naming them.
void CheckKeys(const Json& defaults, const Json& given, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("config: unknown field '" + name + "'");
    if (value.is_object() && defaults.at(key).is_object()) {
      CheckKeys(defaults.at(key), value, name);
    }
  }
}

Json Resolve(const Sub& s) {
  Json cfg = DefaultConfig(s.command);
  if (!s.config_file.empty()) {
    Json file;
    try {
      file = twinforge::io::ReadJsonFile(s.config_file);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (!file.is_object()) throw ConfigError("config: file must hold a JSON object");
    CheckKeys(cfg, file, "");
    cfg.merge_patch(file);
  }
  const std::string seed_ptr = SeedPointer(s.command);
  if (!seed_ptr.empty()) {
    if (const char* env = std::getenv("TWINFORGE_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
        cfg[Json::json_pointer(seed_ptr)] = static_cast<std::uint64_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("TWINFORGE_SEED is not an unsigned integer");
      }
    }
    if (s.seed_opt && s.seed_opt->count() > 0) cfg[Json::json_pointer(seed_ptr)] = s.seed;
  }
  for (const auto& o : s.overrides) o(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinforge: network digital twin workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::vector<std::unique_ptr<Sub>> subs;

  {
    Sub& s = AddSub(app, subs, "gen-dataset", "Generate and label a dataset of scenarios");
    Flag<std::int64_t>(s, "--count", "/count", "Number of samples");
    Flag<std::string>(s, "--labeler", "/labeler", "Label source: sim or qt");
    s.app->get_option("--labeler")->check(CLI::IsMember({"sim", "qt"}));
    Flag<double>(s, "--sim-duration", "/sim/duration", "Simulated seconds measured per sample");
    Flag<double>(s, "--sim-warmup", "/sim/warmup", "Simulated warm-up seconds per sample");
    Flag<int>(s, "--n-min", "/scenario/n_range/0", "Smallest node count");
    Flag<int>(s, "--n-max", "/scenario/n_range/1", "Largest node count");
    Flag<double>(s, "--alpha", "/scenario/alpha", "Power-law exponent");
    Flag<double>(s, "--beta", "/scenario/beta", "Power-law scale");
    Flag<double>(s, "--intensity-min", "/scenario/intensity_range/0",
                 "Smallest per-pair intensity, bits/s");
    Flag<double>(s, "--intensity-max", "/scenario/intensity_range/1",
                 "Largest per-pair intensity, bits/s");
    Flag<double>(s, "--max-loss", "/scenario/max_loss", "Per-link blocking cap for screening");
    Flag<int>(s, "--buffer", "/scenario/buffer", "Buffer size in packets on every link");
  }
  {
    Sub& s = AddSub(app, subs, "train", "Train a twin model on labelled datasets");
    auto dirs = std::make_shared<std::vector<std::string>>();
    CLI::Option* data = s.app->add_option("--data", *dirs, "Dataset directory (repeatable)");
    s.overrides.push_back([dirs, data](Json& cfg) {
      if (data->count() == 0) return;
      Json list = Json::array();
      for (const auto& d : *dirs) list.push_back(Absolute(d));
      cfg["datasets"] = std::move(list);
    });
    Flag<std::string>(s, "--mode", "/hyper/mode", "message-passing or rnn-baseline");
    Flag<int>(s, "--hidden", "/hyper/hidden", "State width d");
    Flag<int>(s, "--iterations", "/hyper/iterations",
              "Message-passing rounds T (rnn-baseline forces 1)");
    // rnn-baseline implies a single round unless T is given explicitly.
    CLI::Option* mode = s.app->get_option("--mode");
    CLI::Option* iters = s.app->get_option("--iterations");
    s.overrides.push_back([mode, iters](Json& cfg) {
      if (mode->count() == 0 || iters->count() > 0) return;
      const auto m = twinforge::twin::ParseMode(cfg["hyper"]["mode"].get<std::string>());
      if (m == twinforge::twin::Mode::kRnnBaseline) cfg["hyper"]["iterations"] = 1;
    });
    Flag<int>(s, "--epochs", "/train/epochs", "Training epochs");
    Flag<int>(s, "--batch-size", "/train/batch_size", "Samples per mini-batch");
    Flag<double>(s, "--lr", "/train/learning_rate", "Adam learning rate");
    Flag<std::string>(s, "--loss", "/train/loss_kind", "mape or mse-log");
    Flag<double>(s, "--val-fraction", "/train/validation_fraction", "Validation share");
  }
  {
    Sub& s = AddSub(app, subs, "eval", "Compare twin models and the analytical model on datasets");
    NamedPaths(s, "--model", "models", "name",
               "Twin model file as [NAME=]PATH (repeatable; NAME defaults to the mode)");
    NamedPaths(s, "--data", "datasets", "bucket",
               "Labelled dataset as [BUCKET=]PATH (repeatable; BUCKET defaults to the node range)");
    BoolFlag(s, "--no-qt", "/qt", false, "Skip the analytical baseline");
  }
  {
    Sub& s = AddSub(app, subs, "optimize", "Search link weights for minimum mean delay");
    PathFlag(s, "--sample", "/sample", "Sample file providing topology and traffic");
    PathFlag(s, "--model", "/model", "Twin model file (evaluator twin)");
    Flag<std::string>(s, "--evaluator", "/evaluator", "twin or qt");
    Flag<std::vector<double>>(s, "--intensities", "/intensities",
                              "Comma-separated per-pair intensities, bits/s; traffic is rescaled "
                              "to each");
    s.app->get_option("--intensities")->delimiter(',');
    Flag<int>(s, "--population", "/es/population", "Even population size");
    Flag<double>(s, "--sigma", "/es/sigma", "Perturbation scale");
    Flag<double>(s, "--lr", "/es/learning_rate", "Search learning rate");
    Flag<int>(s, "--iterations", "/es/iterations", "Iteration budget");
    Flag<int>(s, "--patience", "/es/patience", "Stop after this many iterations without a new best "
                                               "(0 disables)");
    Flag<double>(s, "--sim-duration", "/sim/duration", "Simulated seconds for the final measurement");
    Flag<double>(s, "--sim-warmup", "/sim/warmup", "Warm-up seconds for the final measurement");
    Flag<std::uint64_t>(s, "--sim-seed", "/sim/seed", "Seed of the final measurement");
    BoolFlag(s, "--no-measure", "/measure", false, "Skip the final simulator measurement");
  }
  {
    Sub& s = AddSub(app, subs, "simulate", "Packet-level simulation of one sample");
    PathFlag(s, "--sample", "/sample", "Sample file");
    Flag<double>(s, "--sim-duration", "/sim/duration", "Measured simulated seconds");
    Flag<double>(s, "--sim-warmup", "/sim/warmup", "Warm-up seconds");
    Flag<double>(s, "--propagation-delay", "/sim/propagation_delay", "Seconds per link");
  }
  {
    Sub& s = AddSub(app, subs, "qt", "Analytical M/M/1/b reduced-load model of one sample");
    PathFlag(s, "--sample", "/sample", "Sample file");
    Flag<double>(s, "--tol", "/qt/tol", "Fixed-point tolerance on blocking probabilities");
    Flag<int>(s, "--max-iter", "/qt/max_iter", "Fixed-point iteration cap");
    Flag<double>(s, "--damping", "/qt/damping", "Damping of blocking updates, (0, 1]");
    BoolFlag(s, "--no-thinning", "/qt/thinning", false,
             "Offer every link the raw demand rates (no upstream loss)");
    Flag<double>(s, "--propagation-delay", "/qt/propagation_delay", "Seconds per link");
  }
  {
    Sub& s = AddSub(app, subs, "bench", "Median wall time of twin, analytical model and simulator");
    PathFlag(s, "--model", "/model", "Twin model file");
    PathFlag(s, "--sample", "/sample", "Sample file");
    Flag<int>(s, "--repeats", "/repeats", "Timed runs per engine");
    BoolFlag(s, "--with-sim", "/with_sim", true, "Also time the simulator");
    Flag<double>(s, "--sim-duration", "/sim/duration", "Simulated seconds for the simulator run");
  }

  std::string rerun_manifest, rerun_out;
  bool rerun_force = false;
  int rerun_jobs = 1;
  CLI::App* rerun = app.add_subcommand("rerun", "Re-run an experiment from its manifest and "
                                                "compare output digests");
  rerun->add_option("manifest", rerun_manifest, "manifest.json of the original run")
      ->required()
      ->check(CLI::ExistingFile);
  rerun->add_option("--out", rerun_out, "Output directory for the re-run")->required();
  rerun->add_flag("--force", rerun_force, "Replace an existing experiment directory");
  rerun->add_option("--jobs", rerun_jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  ExecOptions opt;
  opt.argv.assign(argv, argv + argc);
  if (rerun->parsed()) {
    opt.out = rerun_out;
    opt.force = rerun_force;
    opt.jobs = rerun_jobs;
    return Rerun(rerun_manifest, opt);
  }
  for (const auto& s : subs) {
    if (!s->app->parsed()) continue;
    Json cfg;
    try {
      cfg = Resolve(*s);
    } catch (const std::exception& e) {
      std::cerr << "twinforge " << s->command << ": error: " << e.what() << "\n";
      return kExitConfig;
    }
    opt.out = s->out;
    opt.force = s->force;
    opt.jobs = s->jobs;
    return Execute(s->command, cfg, opt);
  }
  return kExitConfig;
}

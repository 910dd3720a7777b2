// Acceptance gate: runs criteria 1-9 and prints one PASS/FAIL line for each.
//
//   acceptance [--only N]...
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "gradcheck.h"
#include "helpers.h"
#include "oracles.h"
#include "twinforge/optim.h"
#include "twinforge/qt.h"
#include "twinforge/rng.h"
#include "twinforge/routing.h"
#include "twinforge/scenario.h"
#include "twinforge/sim.h"
#include "twinforge/train.h"
#include "twinforge/twin.h"

#ifndef TWINFORGE_CLI
#error "TWINFORGE_CLI must name the twinforge executable"
#endif

using namespace twinforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

double RelErr(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------------------
// 1. M/M/1/b closed forms against the solved birth-death chain.

Outcome QueueingOracle() {
  const auto start = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  int bad = 0;
  for (int i = 0; i < 200; ++i) {
    const double rho = rng.Uniform(0.05, 3.0);
    const int b = static_cast<int>(rng.UniformInt(1, 64));
    const double mu = rng.Uniform(1.0, 200.0);
    const auto got = qt::Mm1bMetrics(rho, b, mu);
    const auto want = oracle::SolveBirthDeath(rho, b, mu);
    const double e = std::max({RelErr(got.blocking, want.blocking),
                               RelErr(got.mean_queue_len, want.mean_queue_len),
                               RelErr(got.mean_sojourn, want.mean_sojourn)});
    worst = std::max(worst, e);
    if (!(e <= 1e-9)) ++bad;
  }
  const double t = Seconds(start);
  return {bad == 0 && t < 1.0,
          Fmt("200 cases, worst rel err %.2e (limit 1e-9), %d over, %.3f s (limit 1 s)", worst, bad,
              t)};
}

// ---------------------------------------------------------------------------
// 2. Simulated single link against the closed forms.

Outcome SimulatorAgreement() {
  const double capacity = 40'000.0;
  const double size = 1'000.0;
  const double mu = capacity / size;
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 11;
  for (double rho : {0.5, 0.9}) {
    for (int b : {10, 32}) {
      const Topology topo = testing::MakeTopology(2, {{0, 1, capacity}}, b);
      const TrafficMatrix tm = testing::OneDemand(0, 1, rho * capacity, size);
      const auto routing = DeriveEqualWeightRouting(topo);
      const auto want = oracle::SolveBirthDeath(rho, b, mu);
      // Enough measured injections for 1.05e6 deliveries in expectation.
      const double lambda = rho * mu;
      sim::SimConfig cfg;
      cfg.warmup = 500.0;
      cfg.duration = 1.05e6 / (lambda * (1.0 - want.blocking));
      cfg.seed = seed++;
      const auto r = sim::Simulate(topo, tm, routing, cfg);
      const auto& p = r.paths.at(0);
      const double delay_err = RelErr(p.mean_delay, want.mean_sojourn);
      const double loss_err = std::abs(p.loss - want.blocking);
      const bool pass = p.delivered >= 1'000'000 && delay_err <= 0.02 && loss_err <= 0.005;
      ok = ok && pass;
      detail += Fmt("%srho=%.1f b=%d: delivered %llu, delay err %.4f, loss err %.4f",
                    detail.empty() ? "" : "; ", rho, b,
                    static_cast<unsigned long long>(p.delivered), delay_err, loss_err);
    }
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 3. Reduced-load fixed point.

Outcome FixedPointCorrectness() {
  std::string detail;
  // Single link: the fixed point is the closed form itself.
  bool single = true;
  for (double rho : {0.3, 0.9, 1.0, 1.7}) {
    const double capacity = 25'000.0;
    const Topology topo = testing::MakeTopology(2, {{0, 1, capacity}}, 16);
    const TrafficMatrix tm = testing::OneDemand(0, 1, rho * capacity);
    const auto fp = qt::ReducedLoadFixedPoint(topo, tm, DeriveEqualWeightRouting(topo));
    const auto m = qt::Mm1bMetrics(rho, 16, capacity / tm.mean_packet_size);
    const auto& l = fp.links.at(testing::FindLink(topo, 0, 1));
    single = single && fp.converged && l.blocking == m.blocking &&
             l.mean_sojourn == m.mean_sojourn;
  }
  detail += single ? "single link exact" : "single link MISMATCH";

  // Tandem at per-link rho = 0.9, b = 16.
  const double mu = 40.0;
  const double lambda = 0.9 * mu;
  const Topology tandem = testing::MakeTopology(3, {{0, 1, mu * 1000.0}, {1, 2, mu * 1000.0}}, 16);
  const TrafficMatrix tm = testing::OneDemand(0, 2, lambda * 1000.0);
  qt::FixedPointOptions tight;
  tight.tol = 1e-12;
  const auto fp = qt::ReducedLoadFixedPoint(tandem, tm, DeriveEqualWeightRouting(tandem), tight);
  const auto [p1, p2] = oracle::TandemFixedPoint(lambda, mu, mu, 16);
  const auto& l1 = fp.links.at(testing::FindLink(tandem, 0, 1));
  const auto& l2 = fp.links.at(testing::FindLink(tandem, 1, 2));
  const double tandem_err = std::max({std::abs(l1.blocking - p1), std::abs(l2.blocking - p2),
                                      RelErr(l2.offered_load, lambda * (1.0 - p1))});
  const bool tandem_ok = fp.converged && tandem_err <= 1e-6;
  detail += Fmt("; tandem err %.2e", tandem_err);

  // Residual at the returned point, recomputed with one more map application.
  int res_ok = 0;
  double worst = 0.0;
  const qt::FixedPointOptions opts;
  for (int i = 0; i < 50; ++i) {
    const auto s = testing::Scenario(500 + i, 8, 14, {200.0, 3000.0}, i);
    const auto r = qt::ReducedLoadFixedPoint(s.topology, s.traffic, s.routing, opts);
    std::vector<double> p;
    for (const auto& l : r.links) p.push_back(l.blocking);
    const auto next = qt::ReducedLoadStep(s.topology, s.traffic, s.routing, p);
    double res = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) res = std::max(res, std::abs(next[k].blocking - p[k]));
    worst = std::max(worst, res);
    if (r.converged && res <= opts.tol) ++res_ok;
  }
  detail += Fmt("; residual <= tol on %d/50 (worst %.2e, tol %.0e)", res_ok, worst, opts.tol);
  return {single && tandem_ok && res_ok == 50, detail};
}

// ---------------------------------------------------------------------------
// 4. Reverse-mode gradients against central differences.

Outcome GradientCheck() {
  std::vector<scenario::Sample> set;
  for (std::uint64_t i = 0; i < 2; ++i) {
    auto s = testing::Scenario(40 + i, 5, 5, {500.0, 3000.0}, i);
    s.label = qt::QtPathMetrics(s.topology, s.traffic, s.routing).paths;
    set.push_back(std::move(s));
  }
  const auto norm = twin::ComputeNormalization(set);
  std::vector<twin::Example> ex;
  for (const auto& s : set) ex.push_back(twin::MakeExample(s, norm));
  const std::vector<const twin::Example*> batch{&ex[0], &ex[1]};
  bool ok = true;
  std::string detail;
  for (const twin::Hyper h : {twin::Hyper{16, 4, twin::Mode::kMessagePassing},
                              twin::Hyper{16, 1, twin::Mode::kRnnBaseline}}) {
    for (const auto kind : {twin::LossKind::kMape, twin::LossKind::kMseLogDelay}) {
      const twin::TwinModel m{twin::InitParams(3, h), norm};
      const auto r = testing::CheckGradients(m, batch, kind);
      ok = ok && r.failed == 0;
      detail += Fmt("%s%s/%s: %zu params, %zu over 1e-4 (%zu without the 1e-9 floor), worst abs "
                    "diff %.1e",
                    detail.empty() ? "" : "; ", std::string(twin::ModeName(h.mode)).c_str(),
                    std::string(twin::LossName(kind)).c_str(), r.checked, r.failed,
                    r.failed_without_floor, r.worst_abs);
    }
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 5. Shortest paths against exhaustive enumeration.

Outcome RoutingOracle() {
  Rng rng(5);
  int cost_bad = 0, scale_bad = 0, pairs = 0;
  for (int g = 0; g < 100; ++g) {
    const int n = static_cast<int>(rng.UniformInt(2, 8));
    const Topology t = testing::RandomGraph(rng, n, 0.35);
    std::vector<double> w(t.links.size());
    for (double& x : w) x = rng.Uniform(0.1, 10.0);
    const auto r = DeriveRouting(t, w);
    for (double k : {rng.Uniform(0.01, 100.0), 1e-3 / 0.1, 7.0}) {
      std::vector<double> scaled = w;
      for (double& x : scaled) x *= k;
      const auto rs = DeriveRouting(t, scaled);
      for (int s = 0; s < n; ++s) {
        for (int d = 0; d < n; ++d) {
          if (s != d && rs.LinksOfPath(s, d) != r.LinksOfPath(s, d)) ++scale_bad;
        }
      }
    }
    for (int s = 0; s < n; ++s) {
      for (int d = 0; d < n; ++d) {
        if (s == d) continue;
        ++pairs;
        const double best = oracle::BruteForceMinPathCost(t, w, s, d);
        if (std::abs(PathCost(w, r.LinksOfPath(s, d)) - best) > 1e-12 * best) ++cost_bad;
      }
    }
  }
  return {cost_bad == 0 && scale_bad == 0,
          Fmt("100 graphs, %d pairs: %d cost mismatches, %d path changes under scaling", pairs,
              cost_bad, scale_bad)};
}

// ---------------------------------------------------------------------------
// Shared trained twins for criteria 6 and 7.

constexpr twin::Hyper kAcceptMp{16, 4, twin::Mode::kMessagePassing};
constexpr twin::Hyper kAcceptRnn{16, 1, twin::Mode::kRnnBaseline};

twin::TrainConfig AcceptTrainConfig(std::uint64_t seed) {
  twin::TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 8;
  tc.learning_rate = 3e-3;
  tc.seed = seed;
  tc.validation_fraction = 0.1;
  return tc;
}

std::vector<scenario::Sample> SimDataset(std::uint64_t seed, int count, int n_min, int n_max) {
  scenario::ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.n_range = {n_min, n_max};
  scenario::SampleOptions opts;
  opts.labeler = scenario::Labeler::kSimulator;
  opts.sim.warmup = 50.0;
  opts.sim.duration = 2000.0;
  std::vector<scenario::Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(scenario::GenSample(i, cfg, opts));
  return out;
}

const std::vector<scenario::Sample>& TrainingSet() {
  static const auto data = [] {
    const auto start = Clock::now();
    auto d = SimDataset(101, 1000, 8, 12);
    std::cerr << Fmt("  generated 1000 training samples in %.0f s\n", Seconds(start));
    return d;
  }();
  return data;
}

const twin::TwinModel& TrainedTwin(const twin::Hyper& h, std::uint64_t seed) {
  static std::map<std::pair<int, std::uint64_t>, twin::TwinModel> cache;
  const std::pair<int, std::uint64_t> key{static_cast<int>(h.mode), seed};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const auto start = Clock::now();
  const auto init = twin::InitParams(DeriveSeed(seed, "init"), h);
  auto r = twin::Train(TrainingSet(), init, AcceptTrainConfig(seed));
  std::cerr << Fmt("  trained %s seed %llu in %.0f s (best epoch %d)\n",
                   std::string(twin::ModeName(h.mode)).c_str(),
                   static_cast<unsigned long long>(seed), Seconds(start), r.best_epoch);
  return cache.emplace(key, std::move(r.model)).first->second;
}

// ---------------------------------------------------------------------------
// 6. Generalization trend across network sizes.

Outcome SizeGeneralization() {
  const auto test_in = SimDataset(202, 200, 8, 12);
  const auto test_big = SimDataset(303, 100, 20, 30);
  int holds = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& mp = TrainedTwin(kAcceptMp, seed);
    const auto& rnn = TrainedTwin(kAcceptRnn, seed);
    const double mp_in = twin::Evaluate(mp, test_in).mape;
    const double mp_big = twin::Evaluate(mp, test_big).mape;
    const double rnn_in = twin::Evaluate(rnn, test_in).mape;
    const double rnn_big = twin::Evaluate(rnn, test_big).mape;
    const bool a = mp_in < rnn_in;
    const bool b = rnn_big / rnn_in > mp_big / mp_in;
    if (a && b) ++holds;
    detail += Fmt("%sseed %llu: mp %.4f->%.4f (x%.2f), rnn %.4f->%.4f (x%.2f) [a %s, b %s]",
                  detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed), mp_in, mp_big,
                  mp_big / mp_in, rnn_in, rnn_big, rnn_big / rnn_in, a ? "ok" : "no",
                  b ? "ok" : "no");
  }
  return {holds >= 2, Fmt("both orderings on %d/3 seeds; ", holds) + detail};
}

// ---------------------------------------------------------------------------
// 7. Routing optimization across traffic intensities.

TrafficMatrix Scaled(const TrafficMatrix& tm, double factor) {
  TrafficMatrix out = tm;
  for (auto& d : out.demands) d.rate *= factor;
  return out;
}

Outcome RoutingOptimization() {
  scenario::ScenarioConfig cfg;
  cfg.seed = 7;
  cfg.n_range = {14, 14};
  const Topology topo = scenario::GenTopology(cfg.seed, cfg);
  const TrafficMatrix base =
      scenario::GenTraffic(DeriveSeed(cfg.seed, "c7-traffic"), topo, 1000.0, cfg.mean_packet_size);
  const auto equal = DeriveEqualWeightRouting(topo);
  // Largest scale at which the equal-weight routing keeps every link's
  // blocking within the 3% screening cap.
  auto max_blocking = [&](double f) {
    return qt::MaxBlocking(qt::ReducedLoadFixedPoint(topo, Scaled(base, f), equal).links);
  };
  double lo = 1e-3, hi = 1.0;
  while (max_blocking(hi) < cfg.max_loss) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (max_blocking(mid) < cfg.max_loss ? lo : hi) = mid;
  }
  const double top = lo;

  const auto& model = TrainedTwin(kAcceptMp, 1);
  optim::Evaluator ev;
  ev.kind = optim::EvaluatorKind::kTwin;
  ev.model = &model;
  optim::EsConfig es;
  es.seed = 17;
  sim::SimConfig measure;
  measure.warmup = 100.0;
  measure.duration = 20'000.0;
  measure.seed = 23;

  bool never_worse = true;
  std::vector<double> reduction;
  std::string detail;
  for (double frac : {0.1, 0.325, 0.55, 0.775, 1.0}) {
    const TrafficMatrix tm = Scaled(base, top * frac);
    const auto t = optim::NesOptimize(topo, tm, ev, es, measure);
    const double eq = *t.baseline_sim_delay;
    const double best = *t.best_sim_delay;
    never_worse = never_worse && best <= eq;
    reduction.push_back(eq - best);
    detail += Fmt("%s%.0f bps: %.5f -> %.5f s", detail.empty() ? "" : "; ",
                  1000.0 * top * frac, eq, best);
  }
  const bool grows = reduction.back() > reduction.front();
  return {never_worse && grows,
          detail + Fmt("; reduction %.5f s at lowest vs %.5f s at highest", reduction.front(),
                       reduction.back())};
}

// ---------------------------------------------------------------------------
// 8. Speed ordering on a 30-node sample.

template <typename Fn>
double MedianSeconds(int repeats, Fn&& fn) {
  std::vector<double> t;
  for (int i = 0; i < repeats; ++i) {
    const auto start = Clock::now();
    fn();
    t.push_back(Seconds(start));
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

Outcome SpeedOrdering() {
  const auto s = testing::Scenario(808, 30, 30);
  const twin::TwinModel model{twin::InitParams(1, twin::Hyper{}),
                              twin::ComputeNormalization(std::span(&s, 1))};
  const auto input = twin::MakeInput(s, model.norm);
  volatile double sink = 0.0;
  const double t_twin = MedianSeconds(5, [&] { sink = twin::Forward(model, input)[0]; });
  const double t_qt = MedianSeconds(5, [&] {
    sink = qt::QtPathMetrics(s.topology, s.traffic, s.routing).paths[0].mean_delay;
  });
  sim::SimConfig cfg;
  cfg.duration = 60.0;
  cfg.seed = 3;
  const double t_sim = MedianSeconds(5, [&] {
    sink = sim::Simulate(s.topology, s.traffic, s.routing, cfg).paths[0].mean_delay;
  });
  (void)sink;
  const double ratio = t_sim / t_twin;
  return {t_twin < 1.0 && t_qt < 1.0 && ratio >= 100.0,
          Fmt("twin %.4f s, qt %.6f s, sim %.4f s, sim/twin %.3f (need >= 100); %d-node, %.0f bps "
              "per pair",
              t_twin, t_qt, t_sim, ratio, s.topology.nodes, s.intensity)};
}

// ---------------------------------------------------------------------------
// 9. Every CLI experiment re-runs byte-identically from its manifest.

bool SameTree(const fs::path& a, const fs::path& b, std::string& why) {
  auto files = [](const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      out[fs::relative(e.path(), root).generic_string()] = ss.str();
    }
    return out;
  };
  const auto fa = files(a);
  const auto fb = files(b);
  if (fa.size() != fb.size()) {
    why = "file sets differ";
    return false;
  }
  for (const auto& [name, bytes] : fa) {
    const auto it = fb.find(name);
    if (it == fb.end() || it->second != bytes) {
      why = name + " differs";
      return false;
    }
  }
  return !fa.empty();
}

Outcome Reproducibility() {
  const fs::path root = fs::temp_directory_path() / Fmt("twinforge_accept_%d", static_cast<int>(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = TWINFORGE_CLI;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " >>\"" + (root / "log.txt").string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string r = root.string() + "/";
  const std::vector<std::pair<std::string, std::string>> experiments{
      {"gen_sim", "gen-dataset --labeler sim --count 6 --n-min 5 --n-max 6 --sim-duration 200 "
                  "--seed 4 --jobs 2"},
      {"gen_qt", "gen-dataset --labeler qt --count 20 --n-min 6 --n-max 8 --seed 5"},
      {"train", "train --data " + r + "gen_qt --hidden 8 --iterations 2 --epochs 3 --seed 6"},
      {"eval", "eval --model " + r + "train/model.json --data " + r + "gen_sim --jobs 2"},
      {"optimize", "optimize --sample " + r + "gen_qt/sample_0.json --model " + r +
                       "train/model.json --iterations 5 --intensities 500,1500 "
                       "--sim-duration 100 --jobs 2"},
      {"simulate", "simulate --sample " + r + "gen_qt/sample_1.json --sim-duration 200 --seed 8"},
      {"qt", "qt --sample " + r + "gen_qt/sample_2.json"},
  };
  int ok = 0;
  std::string detail;
  for (const auto& [name, args] : experiments) {
    const fs::path out = root / name;
    const fs::path again = root / (name + "_rerun");
    std::string why;
    if (run(args + " --out " + out.string()) != 0) {
      why = "run failed";
    } else if (run("rerun " + (out / "manifest.json").string() + " --jobs 1 --out " +
                   again.string()) != 0) {
      why = "rerun reported a mismatch";
    } else if (SameTree(out, again, why)) {
      ++ok;
      continue;
    }
    detail += "; " + name + ": " + why;
  }
  const bool pass = ok == static_cast<int>(experiments.size());
  if (pass) fs::remove_all(root);
  return {pass, Fmt("%d/%zu experiments byte-identical (bench is timing and excluded)", ok,
                    experiments.size()) +
                    detail + (pass ? "" : "; log in " + (root / "log.txt").string())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (repeatable)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"queueing oracle", QueueingOracle},
      {"simulator-analytics agreement", SimulatorAgreement},
      {"fixed-point correctness", FixedPointCorrectness},
      {"gradient check", GradientCheck},
      {"routing oracle", RoutingOracle},
      {"size generalization trend", SizeGeneralization},
      {"routing optimization trend", RoutingOptimization},
      {"speed ordering", SpeedOrdering},
      {"reproducibility", Reproducibility},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " "
              << criteria[i].first << ": " << o.detail << Fmt(" [%.1f s]", Seconds(start))
              << std::endl;
  }
  return all ? 0 : 1;
}

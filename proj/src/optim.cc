#include "twinforge/optim.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "twinforge/rng.h"
#include "twinforge/routing.h"

namespace twinforge::optim {

double Fitness(std::span<const double> weights, const Topology& topo, const TrafficMatrix& tm,
               const Evaluator& evaluator) {
  const RoutingConfig routing = DeriveRouting(topo, weights);
  if (evaluator.kind == EvaluatorKind::kQt) {
    return MeanDelay(qt::QtPathMetrics(topo, tm, routing, evaluator.qt_options).paths);
  }
  if (evaluator.model == nullptr) throw EvaluatorFailure("twin evaluator has no model");
  const auto pred = twin::Forward(*evaluator.model,
                                  twin::MakeInput(topo, tm, routing, evaluator.model->norm));
  if (pred.empty()) return 0.0;
  return std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(pred.size());
}

void ValidateEsConfig(const EsConfig& cfg) {
  if (cfg.population < 2 || cfg.population % 2 != 0) {
    throw std::invalid_argument("es: population must be even and >= 2");
  }
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("es: sigma must be > 0");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("es: learning_rate must be > 0");
  if (cfg.iterations < 0) throw std::invalid_argument("es: iterations must be >= 0");
  if (cfg.patience < 0) throw std::invalid_argument("es: patience must be >= 0");
}

std::vector<double> CenteredRanks(std::span<const double> fitness) {
  const std::size_t n = fitness.size();
  std::vector<double> u(n, 0.0);
  if (n < 2) return u;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && fitness[idx[j + 1]] == fitness[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j);  // mean rank of the tie group
    const double value = rank / static_cast<double>(n - 1) - 0.5;
    for (std::size_t k = i; k <= j; ++k) u[idx[k]] = value;
    i = j + 1;
  }
  return u;
}

double SimulatedMeanDelay(std::span<const double> weights, const Topology& topo,
                          const TrafficMatrix& tm, const sim::SimConfig& cfg) {
  const RoutingConfig routing = DeriveRouting(topo, weights);
  const auto result = sim::Simulate(topo, tm, routing, cfg);
  double sum = 0.0;
  std::size_t count = 0;
  for (const PathMetric& m : result.paths) {
    if (m.delivered == 0) continue;
    sum += m.mean_delay;
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

OptimizationTrace NesOptimize(const Topology& topo, const TrafficMatrix& tm,
                              const Evaluator& evaluator, const EsConfig& cfg,
                              const std::optional<sim::SimConfig>& measure) {
  ValidateEsConfig(cfg);
  const std::size_t dim = topo.links.size();
  const std::size_t half = static_cast<std::size_t>(cfg.population / 2);
  const double inv_n_sigma = 1.0 / (static_cast<double>(cfg.population) * cfg.sigma);

  OptimizationTrace trace;
  std::vector<double> theta(dim, 1.0);
  trace.initial_fitness = Fitness(theta, topo, tm, evaluator);
  trace.best_fitness = trace.initial_fitness;
  trace.best_weights = theta;
  trace.rows.push_back({0, trace.initial_fitness, trace.initial_fitness});

  std::vector<std::vector<double>> eps(half, std::vector<double>(dim));
  std::vector<std::vector<double>> candidates(cfg.population, std::vector<double>(dim));
  std::vector<double> fit(cfg.population);
  std::vector<double> step(dim);
  int since_improvement = 0;

  for (int it = 1; it <= cfg.iterations; ++it) {
    Rng rng(DeriveSeed(cfg.seed, static_cast<std::uint64_t>(it)));
    for (auto& e : eps) {
      for (double& v : e) v = rng.Normal();
    }
    for (std::size_t j = 0; j < half; ++j) {
      for (std::size_t i = 0; i < dim; ++i) {
        candidates[2 * j][i] = std::max(theta[i] + cfg.sigma * eps[j][i], kMinLinkWeight);
        candidates[2 * j + 1][i] = std::max(theta[i] - cfg.sigma * eps[j][i], kMinLinkWeight);
      }
    }
    try {
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        fit[c] = Fitness(candidates[c], topo, tm, evaluator);
      }
    } catch (const std::exception& e) {
      trace.final_mean = theta;
      throw EvaluatorFailure("evaluator failed in iteration " + std::to_string(it) + ": " +
                                 e.what(),
                             trace);
    }

    bool improved = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (fit[c] < trace.best_fitness) {
        trace.best_fitness = fit[c];
        trace.best_weights = candidates[c];
        improved = true;
      }
    }

    const std::vector<double> util = CenteredRanks(fit);
    std::fill(step.begin(), step.end(), 0.0);
    for (std::size_t j = 0; j < half; ++j) {
      const double u = util[2 * j] - util[2 * j + 1];  // +eps and -eps members of the pair
      if (u == 0.0) continue;
      for (std::size_t i = 0; i < dim; ++i) step[i] += u * eps[j][i];
    }
    for (std::size_t i = 0; i < dim; ++i) {
      theta[i] = std::max(theta[i] - cfg.learning_rate * inv_n_sigma * step[i], kMinLinkWeight);
    }

    const double mean = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(fit.size());
    trace.rows.push_back({it, trace.best_fitness, mean});

    since_improvement = improved ? 0 : since_improvement + 1;
    if (cfg.patience > 0 && since_improvement >= cfg.patience) break;
  }

  trace.final_mean = theta;
  if (measure) {
    const std::vector<double> ones(dim, 1.0);
    trace.best_sim_delay = SimulatedMeanDelay(trace.best_weights, topo, tm, *measure);
    trace.baseline_sim_delay = SimulatedMeanDelay(ones, topo, tm, *measure);
  }
  return trace;
}

}  // namespace twinforge::optim

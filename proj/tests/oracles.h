#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library code it is used to check.

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "twinforge/types.h"

namespace twinforge::oracle {

struct BirthDeath {
  double blocking;
  double mean_queue_len;
  double mean_sojourn;
};

/// Stationary distribution of the M/M/1/b chain from the global balance
/// equations
///   state 0:      lambda pi_0 = mu pi_1
///   0 < k < b:    (lambda + mu) pi_k = lambda pi_{k-1} + mu pi_{k+1}
///   state b:      mu pi_b = lambda pi_{b-1}
/// solved as a three-term recurrence in long double, run in the direction in
/// which the wanted solution dominates (downward from state b when
/// lambda < mu, upward from state 0 otherwise), then normalized.
inline BirthDeath SolveBirthDeath(double rho, int b, double mu) {
  using R = long double;
  const R lam = static_cast<R>(rho) * mu;
  const R m = static_cast<R>(mu);
  std::vector<R> pi(b + 1, 0.0L);
  if (lam == 0.0L) {
    pi[0] = 1.0L;
  } else if (lam < m) {
    pi[b] = 1.0L;
    pi[b - 1] = m * pi[b] / lam;
    for (int k = b - 1; k >= 1; --k) pi[k - 1] = ((lam + m) * pi[k] - m * pi[k + 1]) / lam;
  } else {
    pi[0] = 1.0L;
    pi[1] = lam * pi[0] / m;
    for (int k = 1; k < b; ++k) pi[k + 1] = ((lam + m) * pi[k] - lam * pi[k - 1]) / m;
  }
  R norm = 0.0L;
  for (R p : pi) norm += p;
  R len = 0.0L;
  for (int k = 0; k <= b; ++k) {
    pi[k] /= norm;
    len += k * pi[k];
  }
  const R pb = pi[b];
  const R thr = lam * (1.0L - pb);
  const R w = thr > 0.0L ? len / thr : 1.0L / m;
  return {static_cast<double>(pb), static_cast<double>(len), static_cast<double>(w)};
}

/// Minimum-cost simple path by exhaustive DFS over all simple paths.
/// Returns +inf when dst is unreachable.
inline double BruteForceMinPathCost(const Topology& topo, const std::vector<double>& weights,
                                    NodeId src, NodeId dst) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> on_path(topo.nodes, false);
  std::function<void(NodeId, double)> dfs = [&](NodeId u, double cost) {
    if (u == dst) {
      best = std::min(best, cost);
      return;
    }
    on_path[u] = true;
    for (std::size_t id = 0; id < topo.links.size(); ++id) {
      const Link& l = topo.links[id];
      if (l.src != u || on_path[l.dst]) continue;
      dfs(l.dst, cost + weights[id]);
    }
    on_path[u] = false;
  };
  dfs(src, 0.0);
  return best;
}

/// Minimum hop count by exhaustive DFS.
inline int BruteForceMinHops(const Topology& topo, NodeId src, NodeId dst) {
  std::vector<double> ones(topo.links.size(), 1.0);
  return static_cast<int>(BruteForceMinPathCost(topo, ones, src, dst));
}

/// Two links in series carrying one flow: iterate the two scalar equations
/// P1 = B(lambda / mu1), P2 = B(lambda (1 - P1) / mu2) with the closed-form
/// blocking probability, until the change is below 1e-15.
inline std::pair<double, double> TandemFixedPoint(double lambda, double mu1, double mu2, int b) {
  auto blocking = [b](double rho) {
    if (std::fabs(rho - 1.0) < 1e-12) return 1.0 / (b + 1.0);
    return (1.0 - rho) * std::pow(rho, b) / (1.0 - std::pow(rho, b + 1));
  };
  double p1 = 0.0, p2 = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const double n1 = blocking(lambda / mu1);
    const double n2 = blocking(lambda * (1.0 - n1) / mu2);
    const double change = std::fabs(n1 - p1) + std::fabs(n2 - p2);
    p1 = n1;
    p2 = n2;
    if (change < 1e-15) break;
  }
  return {p1, p2};
}

/// Least-squares slope of log(frequency) against log(degree) over the
/// degrees that occur.
inline double PowerLawSlope(const std::vector<int>& degrees) {
  std::vector<int> freq;
  for (int d : degrees) {
    if (d >= static_cast<int>(freq.size())) freq.resize(d + 1, 0);
    ++freq[d];
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 1; k < freq.size(); ++k) {
    if (freq[k] == 0) continue;
    const double x = std::log(static_cast<double>(k));
    const double y = std::log(static_cast<double>(freq[k]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace twinforge::oracle

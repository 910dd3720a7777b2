#include "twinforge/qt.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace twinforge::qt {

Mm1bResult Mm1bMetrics(double rho, int b, double mu) {
  if (!(rho >= 0.0)) throw std::invalid_argument("mm1b: rho must be >= 0");
  if (b < 1) throw std::invalid_argument("mm1b: b must be >= 1");
  if (!(mu > 0.0)) throw std::invalid_argument("mm1b: mu must be > 0");

  Mm1bResult r;
  const double bd = static_cast<double>(b);
  if (std::abs(rho - 1.0) <= 1e-9) {
    r.blocking = 1.0 / (bd + 1.0);
    r.mean_queue_len = bd / 2.0;
  } else if (rho == 0.0) {
    r.blocking = 0.0;
    r.mean_queue_len = 0.0;
  } else if (std::abs(rho - 1.0) < 1e-3) {
    // Closed forms cancel badly near rho = 1; sum the distribution directly.
    double norm = 0.0, first = 0.0, term = 1.0, last = 1.0;
    for (int k = 0; k <= b; ++k) {
      norm += term;
      first += k * term;
      last = term;
      term *= rho;
    }
    r.blocking = last / norm;
    r.mean_queue_len = first / norm;
  } else if (rho < 1.0) {
    const double rb = std::pow(rho, bd);
    const double rb1 = rb * rho;
    const double denom = -std::expm1((bd + 1.0) * std::log(rho));  // 1 - rho^(b+1)
    r.blocking = (1.0 - rho) * rb / denom;
    r.mean_queue_len = rho / (1.0 - rho) - (bd + 1.0) * rb1 / denom;
  } else {
    // Rewrite in s = 1/rho so no term overflows for large rho^b.
    const double s = 1.0 / rho;
    const double sb1 = std::pow(s, bd + 1.0);
    const double denom = 1.0 - sb1;  // (rho^(b+1) - 1) / rho^(b+1)
    r.blocking = (rho - 1.0) * s / denom;
    r.mean_queue_len = rho / (1.0 - rho) + (bd + 1.0) / denom;
  }
  const double throughput = rho * mu * (1.0 - r.blocking);
  r.mean_sojourn = throughput > 0.0 ? r.mean_queue_len / throughput : 1.0 / mu;
  return r;
}

std::vector<LinkState> ReducedLoadStep(const Topology& topo, const TrafficMatrix& tm,
                                       const RoutingConfig& routing,
                                       const std::vector<double>& blocking,
                                       bool thinning) {
  const std::size_t nl = topo.links.size();
  std::vector<double> load(nl, 0.0);
  for (const Demand& d : tm.demands) {
    double lambda = d.rate / tm.mean_packet_size;
    if (lambda == 0.0) continue;
    for (LinkId id : routing.LinksOfPath(d.src, d.dst)) {
      load[id] += lambda;
      if (thinning) lambda *= 1.0 - blocking[id];
    }
  }
  std::vector<LinkState> out(nl);
  for (std::size_t i = 0; i < nl; ++i) {
    const Link& l = topo.links[i];
    LinkState& s = out[i];
    s.offered_load = load[i];
    s.service_rate = l.capacity / tm.mean_packet_size;
    s.buffer = l.buffer;
    const Mm1bResult m = Mm1bMetrics(load[i] / s.service_rate, l.buffer, s.service_rate);
    s.blocking = m.blocking;
    s.mean_sojourn = m.mean_sojourn;
  }
  return out;
}

namespace {

std::vector<double> Blockings(const std::vector<LinkState>& links) {
  std::vector<double> p(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) p[i] = links[i].blocking;
  return p;
}

double MaxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

void ValidateFixedPointOptions(const FixedPointOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("fixed point: tol must be > 0");
  if (opts.max_iter < 1) throw std::invalid_argument("fixed point: max_iter must be >= 1");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw std::invalid_argument("fixed point: damping must be in (0, 1]");
  }
  if (!(opts.propagation_delay >= 0.0)) {
    throw std::invalid_argument("fixed point: propagation_delay must be >= 0");
  }
}

FixedPointResult ReducedLoadFixedPoint(const Topology& topo, const TrafficMatrix& tm,
                                       const RoutingConfig& routing,
                                       const FixedPointOptions& opts) {
  ValidateFixedPointOptions(opts);

  FixedPointResult res;
  std::vector<double> current(topo.links.size(), 0.0);
  // Each iteration maps the damped iterate x to y = f(x) and accepts y when
  // its own residual |f(y) - y| is below tol. The returned blockings then
  // satisfy the residual bound exactly, and undamped problems (no upstream
  // coupling) finish in one iteration.
  for (int it = 1; it <= opts.max_iter; ++it) {
    const auto step = ReducedLoadStep(topo, tm, routing, current, opts.thinning);
    const auto candidate = Blockings(step);
    auto check = ReducedLoadStep(topo, tm, routing, candidate, opts.thinning);
    res.iterations = it;
    res.residual = MaxAbsDiff(Blockings(check), candidate);
    if (res.residual < opts.tol) {
      // `step` holds the accepted blockings together with the loads that
      // produced them.
      res.links = step;
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < current.size(); ++i) {
      current[i] = (1.0 - opts.damping) * current[i] + opts.damping * candidate[i];
    }
    if (it == opts.max_iter) res.links = step;
  }
  res.converged = false;
  return res;
}

QtPathResult PathMetricsFromLinks(const Topology& topo, const TrafficMatrix& tm,
                                  const RoutingConfig& routing,
                                  const std::vector<LinkState>& links,
                                  double propagation_delay) {
  (void)topo;
  QtPathResult out;
  out.paths.reserve(tm.demands.size());
  for (const Demand& d : tm.demands) {
    PathMetric m;
    m.src = d.src;
    m.dst = d.dst;
    double pass = 1.0;
    for (LinkId id : routing.LinksOfPath(d.src, d.dst)) {
      m.mean_delay += links[id].mean_sojourn + propagation_delay;
      pass *= 1.0 - links[id].blocking;
    }
    m.loss = 1.0 - pass;
    out.paths.push_back(m);
  }
  return out;
}

QtPathResult QtPathMetrics(const Topology& topo, const TrafficMatrix& tm,
                           const RoutingConfig& routing, const FixedPointOptions& opts) {
  const FixedPointResult fp = ReducedLoadFixedPoint(topo, tm, routing, opts);
  QtPathResult out = PathMetricsFromLinks(topo, tm, routing, fp.links, opts.propagation_delay);
  out.converged = fp.converged;
  return out;
}

double MaxBlocking(const std::vector<LinkState>& links) {
  double m = 0.0;
  for (const LinkState& s : links) m = std::max(m, s.blocking);
  return m;
}

}  // namespace twinforge::qt

#include "twinforge/sim.h"

#include <algorithm>
#include <deque>
#include <queue>
#include <stdexcept>

#include "twinforge/rng.h"

namespace twinforge::sim {

void ValidateSimConfig(const SimConfig& cfg) {
  if (!(cfg.duration > 0.0)) throw std::invalid_argument("sim: duration must be > 0");
  if (!(cfg.warmup >= 0.0)) throw std::invalid_argument("sim: warmup must be >= 0");
  if (!(cfg.propagation_delay >= 0.0)) {
    throw std::invalid_argument("sim: propagation_delay must be >= 0");
  }
}

namespace {

enum class EventType : std::uint8_t { kInject, kDepart, kArrive };

struct Event {
  double time;
  std::uint64_t seq;
  EventType type;
  int id;  // demand, link or packet depending on type
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct Packet {
  int demand = 0;
  int hop = 0;
  double injected_at = 0.0;
  bool measured = false;
  std::uint64_t service_index = 0;  // position in its current link's service order
};

struct LinkQueue {
  std::deque<int> packets;  // front is in service
  std::uint64_t started = 0;
  std::uint64_t finished = 0;
  double last_change = 0.0;
};

class Engine {
 public:
  Engine(const Topology& topo, const TrafficMatrix& tm, const RoutingConfig& routing,
         const SimConfig& cfg)
      : topo_(topo), tm_(tm), cfg_(cfg), rng_(cfg.seed), queues_(topo.links.size()) {
    paths_.reserve(tm.demands.size());
    lambda_.reserve(tm.demands.size());
    for (const Demand& d : tm.demands) {
      paths_.push_back(&routing.LinksOfPath(d.src, d.dst));
      lambda_.push_back(d.rate / tm.mean_packet_size);
    }
    sums_.assign(tm.demands.size(), {});
    stats_.links.resize(topo.links.size());
    window_start_ = cfg.warmup;
    stop_injecting_ = cfg.warmup + cfg.duration;
    stats_.window = cfg.duration;
  }

  SimResult Run() {
    for (int d = 0; d < static_cast<int>(lambda_.size()); ++d) {
      if (lambda_[d] > 0.0) Push(rng_.Exponential(1.0 / lambda_[d]), EventType::kInject, d);
    }
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      ++stats_.events;
      now_ = ev.time;
      switch (ev.type) {
        case EventType::kInject:
          Inject(ev.id);
          break;
        case EventType::kDepart:
          Depart(ev.id);
          break;
        case EventType::kArrive:
          Enter(ev.id);
          break;
      }
    }
    return Finish();
  }

 private:
  struct PathSums {
    double delay = 0.0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
  };

  void Push(double t, EventType type, int id) { events_.push({t, seq_++, type, id}); }

  int NewPacket() {
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      return id;
    }
    packets_.emplace_back();
    return static_cast<int>(packets_.size()) - 1;
  }

  void Release(int id) { free_.push_back(id); }

  // Accumulates the packets-in-system integral of a link up to now_,
  // clipped to the measurement window.
  void Account(LinkId l) {
    LinkQueue& q = queues_[l];
    const double lo = std::max(q.last_change, window_start_);
    const double hi = std::min(now_, stop_injecting_);
    if (hi > lo) stats_.links[l].queue_area += static_cast<double>(q.packets.size()) * (hi - lo);
    q.last_change = now_;
  }

  void StartService(LinkId l) {
    LinkQueue& q = queues_[l];
    Packet& p = packets_[q.packets.front()];
    p.service_index = q.started++;
    const double size = rng_.Exponential(tm_.mean_packet_size);
    Push(now_ + size / topo_.links[l].capacity, EventType::kDepart, l);
  }

  void Inject(int demand) {
    if (now_ > stop_injecting_) return;
    const int id = NewPacket();
    Packet& p = packets_[id];
    p.demand = demand;
    p.hop = 0;
    p.injected_at = now_;
    p.measured = now_ >= window_start_;
    ++stats_.injected;
    Push(now_ + rng_.Exponential(1.0 / lambda_[demand]), EventType::kInject, demand);
    Enter(id);
  }

  void Enter(int id) {
    Packet& p = packets_[id];
    const LinkId l = (*paths_[p.demand])[p.hop];
    LinkQueue& q = queues_[l];
    LinkCounters& c = stats_.links[l];
    ++c.arrivals;
    if (static_cast<int>(q.packets.size()) >= topo_.links[l].buffer) {
      ++c.drops;
      ++stats_.dropped;
      if (p.measured) ++sums_[p.demand].dropped;
      Release(id);
      return;
    }
    Account(l);
    if (now_ >= window_start_ && now_ <= stop_injecting_) ++c.window_accepted;
    q.packets.push_back(id);
    if (q.packets.size() == 1) StartService(l);
  }

  void Depart(LinkId l) {
    LinkQueue& q = queues_[l];
    Account(l);
    const int id = q.packets.front();
    q.packets.pop_front();
    LinkCounters& c = stats_.links[l];
    ++c.departures;
    Packet& p = packets_[id];
    if (p.service_index != q.finished) ++c.fifo_violations;
    ++q.finished;
    if (!q.packets.empty()) StartService(l);

    ++p.hop;
    const double arrive = now_ + cfg_.propagation_delay;
    if (p.hop == static_cast<int>(paths_[p.demand]->size())) {
      ++stats_.delivered;
      if (p.measured) {
        PathSums& s = sums_[p.demand];
        s.delay += arrive - p.injected_at;
        ++s.delivered;
      }
      Release(id);
    } else if (cfg_.propagation_delay > 0.0) {
      Push(arrive, EventType::kArrive, id);
    } else {
      Enter(id);
    }
  }

  SimResult Finish() {
    for (std::size_t l = 0; l < queues_.size(); ++l) {
      stats_.links[l].in_queue_at_end = queues_[l].packets.size();
      stats_.in_flight_at_end += queues_[l].packets.size();
    }
    SimResult r;
    r.paths.reserve(sums_.size());
    for (std::size_t d = 0; d < sums_.size(); ++d) {
      const PathSums& s = sums_[d];
      PathMetric m;
      m.src = tm_.demands[d].src;
      m.dst = tm_.demands[d].dst;
      m.delivered = s.delivered;
      m.mean_delay = s.delivered > 0 ? s.delay / static_cast<double>(s.delivered) : 0.0;
      const std::uint64_t finished = s.delivered + s.dropped;
      m.loss = finished > 0 ? static_cast<double>(s.dropped) / static_cast<double>(finished) : 0.0;
      r.paths.push_back(m);
    }
    r.stats = std::move(stats_);
    return r;
  }

  const Topology& topo_;
  const TrafficMatrix& tm_;
  const SimConfig& cfg_;
  Rng rng_;
  std::vector<const std::vector<LinkId>*> paths_;
  std::vector<double> lambda_;
  std::vector<LinkQueue> queues_;
  std::vector<Packet> packets_;
  std::vector<int> free_;
  std::vector<PathSums> sums_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  double window_start_ = 0.0;
  double stop_injecting_ = 0.0;
  SimStats stats_;
};

}  // namespace

SimResult Simulate(const Topology& topo, const TrafficMatrix& tm,
                   const RoutingConfig& routing, const SimConfig& cfg) {
  ValidateSimConfig(cfg);
  return Engine(topo, tm, routing, cfg).Run();
}

double EstimateEventCount(const SimConfig& cfg, const TrafficMatrix& tm, double mean_hops) {
  double pkts_per_s = 0.0;
  for (const Demand& d : tm.demands) pkts_per_s += d.rate / tm.mean_packet_size;
  // One injection event plus one departure event per hop.
  return pkts_per_s * (cfg.warmup + cfg.duration) * (1.0 + mean_hops);
}

double MeanHops(const TrafficMatrix& tm, const RoutingConfig& routing) {
  if (tm.demands.empty()) return 0.0;
  double hops = 0.0;
  for (const Demand& d : tm.demands) {
    hops += static_cast<double>(routing.LinksOfPath(d.src, d.dst).size());
  }
  return hops / static_cast<double>(tm.demands.size());
}

}  // namespace twinforge::sim

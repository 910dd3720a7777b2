#include "twinforge/twin.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "twinforge/rng.h"

namespace twinforge::twin {

std::string_view ModeName(Mode mode) {
  return mode == Mode::kMessagePassing ? "message-passing" : "rnn-baseline";
}

Mode ParseMode(std::string_view name) {
  if (name == "message-passing" || name == "mp") return Mode::kMessagePassing;
  if (name == "rnn-baseline" || name == "rnn") return Mode::kRnnBaseline;
  throw std::invalid_argument("unknown twin mode: " + std::string(name));
}

std::string_view LossName(LossKind kind) {
  return kind == LossKind::kMape ? "mape" : "mse-log";
}

LossKind ParseLoss(std::string_view name) {
  if (name == "mape") return LossKind::kMape;
  if (name == "mse-log") return LossKind::kMseLogDelay;
  throw std::invalid_argument("unknown loss kind: " + std::string(name));
}

void ValidateHyper(const Hyper& hyper) {
  if (hyper.hidden < 2) throw std::invalid_argument("twin: hidden width must be >= 2");
  if (hyper.iterations < 1) throw std::invalid_argument("twin: iterations must be >= 1");
  if (hyper.mode == Mode::kRnnBaseline && hyper.iterations != 1) {
    throw std::invalid_argument("twin: rnn-baseline mode requires iterations == 1");
  }
}

TwinParameters::TwinParameters(const Hyper& hyper) : hyper_(hyper) {
  ValidateHyper(hyper);
  const int d = hyper.hidden;
  struct Shape {
    const char* name;
    int rows, cols;
  };
  auto cell = [d](std::vector<Shape>& out) {
    static const char* const kSuffix[] = {"W_z", "U_z", "b_z", "W_r", "U_r",
                                          "b_r", "W_n", "U_n", "b_n"};
    for (int k = 0; k < 9; ++k) {
      const bool bias = k % 3 == 2;
      out.push_back({kSuffix[k], d, bias ? 1 : d});
    }
  };
  std::vector<Shape> shapes = {{"W", d, 2}, {"b", d, 1}, {"W", d, 2}, {"b", d, 1}};
  cell(shapes);
  cell(shapes);
  shapes.push_back({"W1", d, d});
  shapes.push_back({"b1", d, 1});
  shapes.push_back({"W2", 1, d});
  shapes.push_back({"b2", 1, 1});

  std::size_t offset = 0;
  for (int i = 0; i < kNumTensors; ++i) {
    std::string prefix;
    if (i <= kLinkEncB) {
      prefix = "link_encoder.";
    } else if (i <= kPathEncB) {
      prefix = "path_encoder.";
    } else if (i <= kPathBn) {
      prefix = "path_update.";
    } else if (i <= kLinkBn) {
      prefix = "link_update.";
    } else {
      prefix = "readout.";
    }
    TensorInfo t{prefix + shapes[i].name, shapes[i].rows, shapes[i].cols, offset};
    offset += t.size();
    layout_.push_back(std::move(t));
  }
  data_.assign(offset, 0.0);
}

const std::string& TwinParameters::NameOf(std::size_t i) const {
  for (const TensorInfo& t : layout_) {
    if (i >= t.offset && i < t.offset + t.size()) return t.name;
  }
  throw std::out_of_range("parameter index out of range");
}

std::size_t ParameterCount(int hidden) {
  const auto d = static_cast<std::size_t>(hidden);
  return 13 * d * d + 14 * d + 1;
}

TwinParameters InitParams(std::uint64_t seed, Hyper hyper) {
  TwinParameters p(hyper);
  Rng rng(seed);
  // Fan-in of the affine map a tensor belongs to.
  auto fan_in = [&](int id) -> int {
    switch (id) {
      case kLinkEncW:
      case kLinkEncB:
      case kPathEncW:
      case kPathEncB:
        return 2;
      case kReadW2:
      case kReadB2:
      case kReadW1:
      case kReadB1:
        return hyper.hidden;
      default:
        return 2 * hyper.hidden;  // gated cells see input and state
    }
  };
  for (int id = 0; id < kNumTensors; ++id) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(id)));
    for (double& v : p.tensor(static_cast<TensorId>(id))) v = rng.Uniform(-bound, bound);
  }
  for (TensorId id : {kPathBz, kLinkBz}) {
    for (double& v : p.tensor(id)) v = 1.0;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Features

TwinInput MakeInput(const Topology& topo, const TrafficMatrix& tm,
                    const RoutingConfig& routing, const Normalization& norm) {
  TwinInput in;
  std::vector<double> offered(topo.links.size(), 0.0);
  in.path_links.reserve(tm.demands.size());
  for (const Demand& d : tm.demands) {
    const std::vector<LinkId>* path = nullptr;
    try {
      path = &routing.LinksOfPath(d.src, d.dst);
    } catch (const UnknownPair&) {
      path = nullptr;
    }
    if (path == nullptr || path->empty()) {
      throw UnroutedDemand("demand (" + std::to_string(d.src) + "," + std::to_string(d.dst) +
                           ") has no path");
    }
    for (LinkId id : *path) offered[id] += d.rate;
    in.path_links.push_back(*path);
    in.path_features.push_back(
        {d.rate / norm.rate_scale, static_cast<double>(path->size()) / norm.hop_scale});
  }
  in.link_features.reserve(topo.links.size());
  for (std::size_t i = 0; i < topo.links.size(); ++i) {
    const double cap = topo.links[i].capacity;
    in.link_features.push_back({cap / norm.capacity_max, offered[i] / cap});
  }
  return in;
}

TwinInput MakeInput(const scenario::Sample& sample, const Normalization& norm) {
  return MakeInput(sample.topology, sample.traffic, sample.routing, norm);
}

// ---------------------------------------------------------------------------
// Dense kernels (row-major, rows x cols).

namespace {

inline double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// out += W x
inline void MatVecAdd(const double* w, const double* x, int rows, int cols, double* out) {
  for (int i = 0; i < rows; ++i) {
    const double* row = w + static_cast<std::size_t>(i) * cols;
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    out[i] += acc;
  }
}

// out += W^T g
inline void MatTVecAdd(const double* w, const double* g, int rows, int cols, double* out) {
  for (int i = 0; i < rows; ++i) {
    const double* row = w + static_cast<std::size_t>(i) * cols;
    const double gi = g[i];
    if (gi == 0.0) continue;
    for (int j = 0; j < cols; ++j) out[j] += row[j] * gi;
  }
}

// dW += g x^T
inline void OuterAdd(const double* g, const double* x, int rows, int cols, double* dw) {
  for (int i = 0; i < rows; ++i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    double* row = dw + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) row[j] += gi * x[j];
  }
}

inline void VecAdd(const double* a, int n, double* out) {
  for (int i = 0; i < n; ++i) out[i] += a[i];
}

/// Pointers to the nine tensors of one gated recurrent cell.
struct CellParams {
  const double *wz, *uz, *bz, *wr, *ur, *br, *wn, *un, *bn;
};

struct CellGrads {
  double *wz, *uz, *bz, *wr, *ur, *br, *wn, *un, *bn;
};

CellParams Cell(const TwinParameters& p, TensorId base) {
  auto t = [&](int k) { return p.tensor(static_cast<TensorId>(base + k)).data(); };
  return {t(0), t(1), t(2), t(3), t(4), t(5), t(6), t(7), t(8)};
}

CellGrads Cell(TwinParameters& p, TensorId base) {
  auto t = [&](int k) { return p.tensor(static_cast<TensorId>(base + k)).data(); };
  return {t(0), t(1), t(2), t(3), t(4), t(5), t(6), t(7), t(8)};
}

/// Gated recurrent cell: z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// n = tanh(Wn x + bn + r * (Un h)), h' = (1 - z) n + z h.
/// Scratch vectors z, r, un, n are left holding the activations.
void CellForward(const CellParams& c, int d, const double* x, const double* h, double* z,
                 double* r, double* un, double* n, double* out) {
  for (int i = 0; i < d; ++i) {
    z[i] = c.bz[i];
    r[i] = c.br[i];
    n[i] = c.bn[i];
    un[i] = 0.0;
  }
  MatVecAdd(c.wz, x, d, d, z);
  MatVecAdd(c.uz, h, d, d, z);
  MatVecAdd(c.wr, x, d, d, r);
  MatVecAdd(c.ur, h, d, d, r);
  MatVecAdd(c.wn, x, d, d, n);
  MatVecAdd(c.un, h, d, d, un);
  for (int i = 0; i < d; ++i) {
    z[i] = Sigmoid(z[i]);
    r[i] = Sigmoid(r[i]);
    n[i] = std::tanh(n[i] + r[i] * un[i]);
    out[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
  }
}

/// Backpropagates dout through one cell step. Adds into dx and dh.
void CellBackward(const CellParams& c, const CellGrads& g, int d, const double* x,
                  const double* h, const double* z, const double* r, const double* un,
                  const double* n, const double* dout, double* dx, double* dh,
                  std::vector<double>& scratch) {
  scratch.resize(4 * static_cast<std::size_t>(d));
  double* daz = scratch.data();
  double* dar = daz + d;
  double* dan = dar + d;
  double* dun = dan + d;
  for (int i = 0; i < d; ++i) {
    const double dn = dout[i] * (1.0 - z[i]);
    const double dz = dout[i] * (h[i] - n[i]);
    dh[i] += dout[i] * z[i];
    dan[i] = dn * (1.0 - n[i] * n[i]);
    const double dr = dan[i] * un[i];
    dun[i] = dan[i] * r[i];
    daz[i] = dz * z[i] * (1.0 - z[i]);
    dar[i] = dr * r[i] * (1.0 - r[i]);
  }
  OuterAdd(dan, x, d, d, g.wn);
  VecAdd(dan, d, g.bn);
  MatTVecAdd(c.wn, dan, d, d, dx);
  OuterAdd(dun, h, d, d, g.un);
  MatTVecAdd(c.un, dun, d, d, dh);
  OuterAdd(daz, x, d, d, g.wz);
  OuterAdd(daz, h, d, d, g.uz);
  VecAdd(daz, d, g.bz);
  MatTVecAdd(c.wz, daz, d, d, dx);
  MatTVecAdd(c.uz, daz, d, d, dh);
  OuterAdd(dar, x, d, d, g.wr);
  OuterAdd(dar, h, d, d, g.ur);
  VecAdd(dar, d, g.br);
  MatTVecAdd(c.wr, dar, d, d, dx);
  MatTVecAdd(c.ur, dar, d, d, dh);
}

// The rnn baseline sees only static link properties; the aggregated offered
// load would leak other paths' traffic into every prediction.
std::array<double, 2> LinkEncoderInput(const Hyper& h, const std::array<double, 2>& f) {
  return {f[0], h.mode == Mode::kMessagePassing ? f[1] : 0.0};
}

bool UsesLinkUpdate(const Hyper& h, int round) {
  return h.mode == Mode::kMessagePassing && round + 1 < h.iterations;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward

std::vector<double> Forward(const TwinModel& model, const TwinInput& input,
                            ForwardCache* cache) {
  const TwinParameters& p = model.params;
  const Hyper& hp = p.hyper();
  const int d = hp.hidden;
  const int rounds = hp.iterations;
  const std::size_t nl = input.link_features.size();
  const std::size_t np = input.path_links.size();
  const auto ud = static_cast<std::size_t>(d);

  std::size_t steps = 0;
  for (const auto& links : input.path_links) {
    if (links.empty()) throw UnroutedDemand("demand has an empty path");
    steps += links.size();
  }

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.link_states.assign(rounds + 1, {});
  c.path_states.assign(rounds + 1, {});
  c.messages.assign(rounds, {});
  for (auto* v : {&c.path_h, &c.path_z, &c.path_r, &c.path_un, &c.path_n}) {
    v->assign(rounds, {});
  }
  for (auto* v : {&c.link_z, &c.link_r, &c.link_un, &c.link_n}) v->assign(rounds, {});

  // Encoders.
  auto& h0 = c.link_states[0];
  h0.assign(nl * ud, 0.0);
  for (std::size_t l = 0; l < nl; ++l) {
    double* out = h0.data() + l * ud;
    std::copy_n(p.tensor(kLinkEncB).data(), d, out);
    const auto x = LinkEncoderInput(hp, input.link_features[l]);
    MatVecAdd(p.tensor(kLinkEncW).data(), x.data(), d, 2, out);
  }
  auto& s0 = c.path_states[0];
  s0.assign(np * ud, 0.0);
  for (std::size_t q = 0; q < np; ++q) {
    double* out = s0.data() + q * ud;
    std::copy_n(p.tensor(kPathEncB).data(), d, out);
    MatVecAdd(p.tensor(kPathEncW).data(), input.path_features[q].data(), d, 2, out);
  }

  const CellParams path_cell = Cell(p, kPathWz);
  const CellParams link_cell = Cell(p, kLinkWz);
  std::vector<double> state(ud);
  for (int t = 0; t < rounds; ++t) {
    const std::vector<double>& links_in = c.link_states[t];
    const bool link_update = UsesLinkUpdate(hp, t);
    auto& ph = c.path_h[t];
    auto& pz = c.path_z[t];
    auto& pr = c.path_r[t];
    auto& pu = c.path_un[t];
    auto& pn = c.path_n[t];
    for (auto* v : {&ph, &pz, &pr, &pu, &pn}) v->assign(steps * ud, 0.0);
    auto& next_paths = c.path_states[t + 1];
    next_paths.assign(np * ud, 0.0);
    auto& msg = c.messages[t];
    if (link_update) msg.assign(nl * ud, 0.0);

    std::size_t step = 0;
    for (std::size_t q = 0; q < np; ++q) {
      std::copy_n(c.path_states[t].data() + q * ud, d, state.data());
      for (LinkId l : input.path_links[q]) {
        const std::size_t o = step * ud;
        std::copy_n(state.data(), d, ph.data() + o);
        CellForward(path_cell, d, links_in.data() + static_cast<std::size_t>(l) * ud,
                    ph.data() + o, pz.data() + o, pr.data() + o, pu.data() + o, pn.data() + o,
                    state.data());
        if (link_update) VecAdd(state.data(), d, msg.data() + static_cast<std::size_t>(l) * ud);
        ++step;
      }
      std::copy_n(state.data(), d, next_paths.data() + q * ud);
    }

    auto& next_links = c.link_states[t + 1];
    if (link_update) {
      auto& lz = c.link_z[t];
      auto& lr = c.link_r[t];
      auto& lu = c.link_un[t];
      auto& ln = c.link_n[t];
      for (auto* v : {&lz, &lr, &lu, &ln}) v->assign(nl * ud, 0.0);
      next_links.assign(nl * ud, 0.0);
      for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t o = l * ud;
        CellForward(link_cell, d, msg.data() + o, links_in.data() + o, lz.data() + o,
                    lr.data() + o, lu.data() + o, ln.data() + o, next_links.data() + o);
      }
    } else {
      next_links = links_in;
    }
  }

  // Readout: softplus(W2 tanh(W1 h + b1) + b2) * delay_scale.
  const auto& final_paths = c.path_states[rounds];
  c.readout_hidden.assign(np * ud, 0.0);
  c.raw.assign(np, 0.0);
  std::vector<double> pred(np);
  for (std::size_t q = 0; q < np; ++q) {
    double* a = c.readout_hidden.data() + q * ud;
    std::copy_n(p.tensor(kReadB1).data(), d, a);
    MatVecAdd(p.tensor(kReadW1).data(), final_paths.data() + q * ud, d, d, a);
    for (int i = 0; i < d; ++i) a[i] = std::tanh(a[i]);
    double y = p.tensor(kReadB2)[0];
    MatVecAdd(p.tensor(kReadW2).data(), a, 1, d, &y);
    c.raw[q] = y;
    pred[q] = Softplus(y) * model.norm.delay_scale;
  }
  return pred;
}

void Backward(const TwinModel& model, const TwinInput& input, const ForwardCache& c,
              std::span<const double> dpred, TwinParameters& grad) {
  const TwinParameters& p = model.params;
  const Hyper& hp = p.hyper();
  const int d = hp.hidden;
  const int rounds = hp.iterations;
  const std::size_t nl = input.link_features.size();
  const std::size_t np = input.path_links.size();
  const auto ud = static_cast<std::size_t>(d);
  if (dpred.size() != np) throw std::invalid_argument("backward: gradient size mismatch");

  // Readout.
  std::vector<double> dpaths(np * ud, 0.0);
  std::vector<double> dpre(ud);
  const auto& final_paths = c.path_states[rounds];
  for (std::size_t q = 0; q < np; ++q) {
    const double dy = dpred[q] * model.norm.delay_scale * Sigmoid(c.raw[q]);
    if (dy == 0.0) continue;
    const double* a = c.readout_hidden.data() + q * ud;
    grad.tensor(kReadB2)[0] += dy;
    double* dw2 = grad.tensor(kReadW2).data();
    const double* w2 = p.tensor(kReadW2).data();
    for (int i = 0; i < d; ++i) {
      dw2[i] += dy * a[i];
      dpre[i] = dy * w2[i] * (1.0 - a[i] * a[i]);
    }
    OuterAdd(dpre.data(), final_paths.data() + q * ud, d, d, grad.tensor(kReadW1).data());
    VecAdd(dpre.data(), d, grad.tensor(kReadB1).data());
    MatTVecAdd(p.tensor(kReadW1).data(), dpre.data(), d, d, dpaths.data() + q * ud);
  }

  const CellParams path_cell = Cell(p, kPathWz);
  const CellParams link_cell = Cell(p, kLinkWz);
  const CellGrads path_grad = Cell(grad, kPathWz);
  const CellGrads link_grad = Cell(grad, kLinkWz);
  std::vector<double> scratch;
  std::vector<double> dlinks_next;  // gradient w.r.t. link states of round t+1
  std::vector<double> dstate(ud), dprev(ud);

  std::size_t steps = 0;
  for (const auto& links : input.path_links) steps += links.size();

  for (int t = rounds - 1; t >= 0; --t) {
    const bool link_update = UsesLinkUpdate(hp, t);
    const auto& links_in = c.link_states[t];
    std::vector<double> dlinks(nl * ud, 0.0);
    std::vector<double> dmsg;
    if (link_update) {
      dmsg.assign(nl * ud, 0.0);
      const auto& msg = c.messages[t];
      for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t o = l * ud;
        CellBackward(link_cell, link_grad, d, msg.data() + o, links_in.data() + o,
                     c.link_z[t].data() + o, c.link_r[t].data() + o, c.link_un[t].data() + o,
                     c.link_n[t].data() + o, dlinks_next.data() + o, dmsg.data() + o,
                     dlinks.data() + o, scratch);
      }
    } else if (!dlinks_next.empty()) {
      dlinks = dlinks_next;
    }

    std::vector<double> dpaths_prev(np * ud, 0.0);
    std::size_t step = steps;
    for (std::size_t qq = np; qq-- > 0;) {
      const auto& route = input.path_links[qq];
      std::copy_n(dpaths.data() + qq * ud, d, dstate.data());
      for (std::size_t k = route.size(); k-- > 0;) {
        --step;
        const LinkId l = route[k];
        const std::size_t lo = static_cast<std::size_t>(l) * ud;
        if (link_update) VecAdd(dmsg.data() + lo, d, dstate.data());
        const std::size_t o = step * ud;
        std::fill(dprev.begin(), dprev.end(), 0.0);
        CellBackward(path_cell, path_grad, d, links_in.data() + lo, c.path_h[t].data() + o,
                     c.path_z[t].data() + o, c.path_r[t].data() + o, c.path_un[t].data() + o,
                     c.path_n[t].data() + o, dstate.data(), dlinks.data() + lo, dprev.data(),
                     scratch);
        std::swap(dstate, dprev);
      }
      std::copy_n(dstate.data(), d, dpaths_prev.data() + qq * ud);
    }
    dpaths = std::move(dpaths_prev);
    dlinks_next = std::move(dlinks);
  }

  // Encoders.
  for (std::size_t l = 0; l < nl; ++l) {
    const double* g = dlinks_next.data() + l * ud;
    const auto x = LinkEncoderInput(hp, input.link_features[l]);
    OuterAdd(g, x.data(), d, 2, grad.tensor(kLinkEncW).data());
    VecAdd(g, d, grad.tensor(kLinkEncB).data());
  }
  for (std::size_t q = 0; q < np; ++q) {
    const double* g = dpaths.data() + q * ud;
    OuterAdd(g, input.path_features[q].data(), d, 2, grad.tensor(kPathEncW).data());
    VecAdd(g, d, grad.tensor(kPathEncB).data());
  }
}

// ---------------------------------------------------------------------------
// Losses

namespace {

void CheckLossArgs(std::span<const double> pred, std::span<const double> label) {
  if (pred.size() != label.size()) throw std::invalid_argument("loss: size mismatch");
  for (double l : label) {
    if (!(l > 0.0)) throw std::invalid_argument("loss: labels must be > 0");
  }
}

}  // namespace

double Loss(std::span<const double> pred, std::span<const double> label, LossKind kind) {
  CheckLossArgs(pred, label);
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (kind == LossKind::kMape) {
      sum += std::abs(pred[i] - label[i]) / label[i];
    } else {
      const double e = std::log(pred[i]) - std::log(label[i]);
      sum += e * e;
    }
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<double> LossGradient(std::span<const double> pred, std::span<const double> label,
                                 LossKind kind) {
  CheckLossArgs(pred, label);
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (kind == LossKind::kMape) {
      const double diff = pred[i] - label[i];
      g[i] = (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / label[i];
    } else {
      g[i] = 2.0 * (std::log(pred[i]) - std::log(label[i])) / pred[i];
    }
  }
  return g;
}

Example MakeExample(const scenario::Sample& sample, const Normalization& norm) {
  if (!sample.label) throw std::invalid_argument("example: sample has no label");
  Example ex;
  ex.input = MakeInput(sample, norm);
  ex.label.reserve(sample.label->size());
  for (const PathMetric& m : *sample.label) {
    ex.label.push_back(m.mean_delay);
    ex.usable.push_back(m.mean_delay > 0.0);
  }
  if (ex.label.size() != ex.input.path_links.size()) {
    throw std::invalid_argument("example: label does not match demands");
  }
  return ex;
}

double LossAndGradient(const TwinModel& model, std::span<const Example* const> batch,
                       LossKind kind, TwinParameters& grad) {
  if (batch.empty()) throw std::invalid_argument("batch is empty");
  std::size_t count = 0;
  for (const Example* ex : batch) {
    count += static_cast<std::size_t>(std::count(ex->usable.begin(), ex->usable.end(), true));
  }
  if (count == 0) throw std::invalid_argument("batch has no usable labels");
  const double inv = 1.0 / static_cast<double>(count);

  double total = 0.0;
  ForwardCache cache;
  std::vector<double> pred_u, label_u;
  for (const Example* ex : batch) {
    const std::vector<double> pred = Forward(model, ex->input, &cache);
    pred_u.clear();
    label_u.clear();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!ex->usable[i]) continue;
      pred_u.push_back(pred[i]);
      label_u.push_back(ex->label[i]);
    }
    total += Loss(pred_u, label_u, kind) * static_cast<double>(pred_u.size());
    const std::vector<double> gu = LossGradient(pred_u, label_u, kind);
    std::vector<double> dpred(pred.size(), 0.0);
    for (std::size_t i = 0, k = 0; i < pred.size(); ++i) {
      if (ex->usable[i]) dpred[i] = gu[k++] * inv;
    }
    Backward(model, ex->input, cache, dpred, grad);
  }
  const auto& flat = grad.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!std::isfinite(flat[i])) {
      throw NonFiniteGradient("non-finite gradient in tensor " + grad.NameOf(i));
    }
  }
  return total * inv;
}

Normalization ComputeNormalization(std::span<const scenario::Sample> samples) {
  Normalization n;
  n.capacity_max = 0.0;
  n.rate_scale = 0.0;
  n.hop_scale = 0.0;
  std::vector<double> delays;
  for (const auto& s : samples) {
    for (const Link& l : s.topology.links) n.capacity_max = std::max(n.capacity_max, l.capacity);
    for (const Demand& d : s.traffic.demands) {
      n.rate_scale = std::max(n.rate_scale, d.rate);
      n.hop_scale = std::max(
          n.hop_scale, static_cast<double>(s.routing.LinksOfPath(d.src, d.dst).size()));
    }
    if (s.label) {
      for (const PathMetric& m : *s.label) {
        if (m.mean_delay > 0.0) delays.push_back(m.mean_delay);
      }
    }
  }
  if (n.capacity_max <= 0.0) n.capacity_max = 1.0;
  if (n.rate_scale <= 0.0) n.rate_scale = 1.0;
  if (n.hop_scale <= 0.0) n.hop_scale = 1.0;
  if (!delays.empty()) {
    const auto mid = delays.begin() + static_cast<std::ptrdiff_t>(delays.size() / 2);
    std::nth_element(delays.begin(), mid, delays.end());
    n.delay_scale = *mid;
  }
  return n;
}

}  // namespace twinforge::twin

#include "svguard/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

#include "svguard/emg_model.hpp"

namespace svguard::sim {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int Topology::add_node(std::string name, bool observe, ClockModel clock) {
  nodes.push_back(Node{std::move(name), observe, clock});
  return static_cast<int>(nodes.size()) - 1;
}

std::vector<ObservationPoint> Topology::observation_points() const {
  std::vector<ObservationPoint> out;
  for (int n = 0; n < static_cast<int>(nodes.size()); ++n) {
    if (!nodes[static_cast<std::size_t>(n)].observe) continue;
    std::vector<int> lanes;
    for (const auto& l : links)
      if (l.to == n) lanes.push_back(l.lane);
    std::sort(lanes.begin(), lanes.end());
    lanes.erase(std::unique(lanes.begin(), lanes.end()), lanes.end());
    for (int lane : lanes) {
      const auto& name = nodes[static_cast<std::size_t>(n)].name;
      out.push_back({n, lane, lanes.size() == 1 ? name : name + "/" + std::to_string(lane)});
    }
  }
  return out;
}

void Topology::validate() const {
  const int n = static_cast<int>(nodes.size());
  if (publisher < 0 || publisher >= n) throw std::invalid_argument("publisher is not a node");
  for (const auto& l : links) {
    if (l.from < 0 || l.from >= n || l.to < 0 || l.to >= n) throw std::invalid_argument("link references a missing node");
    const auto& lat = l.latency;
    if (lat.sigma_s < 0 || lat.tau_s < 0 || lat.mu_s + lat.tau_s < 0)
      throw std::invalid_argument("link latency must be non-negative in expectation");
  }
  // Reachability per (node, lane): BFS over lane-preserving forwarding.
  std::vector<std::vector<char>> seen(static_cast<std::size_t>(n));
  std::vector<std::pair<int, int>> stack;
  for (const auto& l : links)
    if (l.from == publisher) stack.emplace_back(l.to, l.lane);
  auto mark = [&](int node, int lane) {
    auto& s = seen[static_cast<std::size_t>(node)];
    if (static_cast<int>(s.size()) <= lane) s.resize(static_cast<std::size_t>(lane) + 1, 0);
    if (s[static_cast<std::size_t>(lane)]) return false;
    s[static_cast<std::size_t>(lane)] = 1;
    return true;
  };
  while (!stack.empty()) {
    auto [node, lane] = stack.back();
    stack.pop_back();
    if (!mark(node, lane)) continue;
    for (const auto& l : links)
      if (l.from == node && l.lane == lane) stack.emplace_back(l.to, l.lane);
  }
  for (const auto& p : observation_points()) {
    const auto& s = seen[static_cast<std::size_t>(p.node)];
    if (static_cast<int>(s.size()) <= p.lane || !s[static_cast<std::size_t>(p.lane)])
      throw std::invalid_argument("observation point " + p.name + " is unreachable from the publisher");
  }
  if (observation_points().empty()) throw std::invalid_argument("topology has no observation point");
}

Topology star_topology(const LinkLatency& hop, const Wander& wander, const ClockModel& subscriber_clock) {
  Topology t;
  t.publisher = t.add_node("MU");
  const int sw = t.add_node("switch");
  const int sub = t.add_node("IED", true, subscriber_clock);
  t.links.push_back({t.publisher, sw, 0, hop, {}});
  t.links.push_back({sw, sub, 0, hop, wander});
  return t;
}

Topology hsr_ring(int n_ieds, const LinkLatency& hop, const Wander& wander, std::span<const ClockModel> clocks) {
  if (n_ieds < 2) throw std::invalid_argument("ring needs at least two IEDs");
  if (!clocks.empty() && clocks.size() != static_cast<std::size_t>(n_ieds))
    throw std::invalid_argument("one clock per IED expected");
  Topology t;
  t.ring_ieds = n_ieds;
  t.publisher = t.add_node("QuadBox");
  for (int k = 1; k <= n_ieds; ++k)
    t.add_node("IED" + std::to_string(k), true, clocks.empty() ? ClockModel{} : clocks[static_cast<std::size_t>(k - 1)]);
  for (int k = 0; k < n_ieds; ++k) t.links.push_back({k, k + 1, 0, hop, wander});
  t.links.push_back({0, n_ieds, 1, hop, wander});
  for (int k = n_ieds; k > 1; --k) t.links.push_back({k, k - 1, 1, hop, wander});
  return t;
}

std::size_t ScenarioTrace::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(arrivals.begin(), arrivals.end(), [&](const Arrival& a) { return a.label == label; }));
}

double draw_latency(const LinkLatency& l, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double mean = l.mu_s + l.tau_s;
  const double bound = l.clip_sigmas * std::sqrt(l.sigma_s * l.sigma_s + l.tau_s * l.tau_s);
  for (;;) {
    double x = l.mu_s + l.sigma_s * gauss(rng);
    if (l.tau_s > 0) x += std::exponential_distribution<double>(1.0 / l.tau_s)(rng);
    if (l.clip_sigmas <= 0.0 || bound == 0.0 || std::abs(x - mean) <= bound) return x;
  }
}

namespace {

struct Event {
  std::int64_t t_ns;
  std::uint64_t seq;
  int link;  // -1: publisher emission
  std::int64_t slot;
  Label label;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const { return a.t_ns != b.t_ns ? a.t_ns > b.t_ns : a.seq > b.seq; }
};

void sort_trace(ScenarioTrace& tr) {
  std::stable_sort(tr.arrivals.begin(), tr.arrivals.end(),
                   [](const Arrival& a, const Arrival& b) { return a.t_ns < b.t_ns; });
}

}  // namespace

std::vector<ScenarioTrace> simulate(const Topology& base, const StreamConfig& stream, std::uint64_t seed,
                                    const std::optional<PathAttacker>& attacker) {
  base.validate();
  Topology topo = base;
  int attacker_node = -1;
  if (attacker) {
    if (attacker->node < 0 || attacker->node >= static_cast<int>(topo.nodes.size()))
      throw std::invalid_argument("attacker node outside the topology");
    attacker_node = topo.add_node("attacker");
    topo.links.push_back({attacker_node, attacker->node, attacker->lane, attacker->latency, {}});
  }
  if (stream.fs <= 0) throw std::invalid_argument("fs must be positive");
  if (!(stream.duration_s > 0)) throw std::invalid_argument("duration must be positive");

  const StreamTiming timing(stream.fs);
  const auto points = base.observation_points();
  std::vector<ScenarioTrace> traces(points.size());
  // (node, lane) -> trace index
  std::vector<std::vector<int>> point_of(topo.nodes.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    traces[p].observer = points[p].name;
    traces[p].fs = stream.fs;
    auto& v = point_of[static_cast<std::size_t>(points[p].node)];
    if (static_cast<int>(v.size()) <= points[p].lane) v.resize(static_cast<std::size_t>(points[p].lane) + 1, -1);
    v[static_cast<std::size_t>(points[p].lane)] = static_cast<int>(p);
  }
  const std::int64_t total = std::llround(stream.duration_s * stream.fs);
  for (auto& tr : traces) tr.arrivals.reserve(static_cast<std::size_t>(total));

  std::vector<std::vector<int>> out_links(topo.nodes.size());
  for (int i = 0; i < static_cast<int>(topo.links.size()); ++i)
    out_links[static_cast<std::size_t>(topo.links[static_cast<std::size_t>(i)].from)].push_back(i);

  std::vector<std::mt19937_64> rng;
  std::vector<double> phase;
  for (std::size_t i = 0; i < topo.links.size(); ++i) {
    rng.emplace_back(derive_seed(seed, i));
    phase.push_back(std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng.back()));
  }

  const std::int64_t t0 = stream.start_second * kNanosPerSecond;
  auto delay_ns = [&](int link, std::int64_t t_send) {
    const Link& l = topo.links[static_cast<std::size_t>(link)];
    double d = draw_latency(l.latency, rng[static_cast<std::size_t>(link)]);
    if (l.wander.amplitude_s != 0.0 && l.wander.period_s > 0.0) {
      const double t = static_cast<double>(t_send - t0) * 1e-9;
      d += l.wander.amplitude_s * std::sin(2 * std::numbers::pi * t / l.wander.period_s + phase[static_cast<std::size_t>(link)]);
    }
    return std::max<std::int64_t>(0, std::llround(d * 1e9));
  };
  auto slot_time = [&](std::int64_t slot) {
    const std::int64_t second = stream.start_second + slot / stream.fs;
    return timing.expected_ns(second, static_cast<int>(slot % stream.fs));
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue;
  std::uint64_t seq = 0;
  queue.push({slot_time(0), seq++, -1, 0, Label::Legitimate});
  if (attacker) {
    // The attacker's schedule does not depend on the network, so all of its
    // emissions are queued up front.
    std::mt19937_64 arng(derive_seed(seed, 0xA77AC4));
    std::normal_distribution<double> offset(attacker->error_s, attacker->jitter_s);
    for (std::int64_t s = 0; s < total; ++s) {
      const std::int64_t t = slot_time(s);
      if (t < attacker->start_ns || t >= attacker->stop_ns) continue;
      const double o = attacker->jitter_s > 0 ? offset(arng) : attacker->error_s;
      queue.push({t + std::llround(o * 1e9), seq++, -2, s, Label::Malicious});
    }
  }

  auto forward = [&](int node, int lane, int from_link, const Event& ev) {
    for (int l : out_links[static_cast<std::size_t>(node)]) {
      const Link& out = topo.links[static_cast<std::size_t>(l)];
      if (out.lane == lane && l != from_link && out.to != topo.publisher && out.to != attacker_node)
        queue.push({ev.t_ns + delay_ns(l, ev.t_ns), seq++, l, ev.slot, ev.label});
    }
  };

  while (!queue.empty()) {
    const Event ev = queue.top();
    queue.pop();
    if (ev.link == -1) {
      if (ev.slot + 1 < total) queue.push({slot_time(ev.slot + 1), seq++, -1, ev.slot + 1, Label::Legitimate});
      for (int l : out_links[static_cast<std::size_t>(topo.publisher)])
        queue.push({ev.t_ns + delay_ns(l, ev.t_ns), seq++, l, ev.slot, ev.label});
      continue;
    }
    if (ev.link == -2) {
      const int l = static_cast<int>(topo.links.size()) - 1;
      queue.push({ev.t_ns + delay_ns(l, ev.t_ns), seq++, l, ev.slot, ev.label});
      continue;
    }
    const Link& in = topo.links[static_cast<std::size_t>(ev.link)];
    const int node = in.to;
    const int lane = in.lane;
    const Node& n = topo.nodes[static_cast<std::size_t>(node)];
    if (n.observe) {
      const auto& v = point_of[static_cast<std::size_t>(node)];
      const int p = lane < static_cast<int>(v.size()) ? v[static_cast<std::size_t>(lane)] : -1;
      if (p >= 0) {
        const double skew_ns = n.clock.offset_us * 1e3 + n.clock.drift_us_per_s * 1e-6 * static_cast<double>(ev.t_ns - t0);
        const std::int64_t slot_abs = stream.start_second * stream.fs + ev.slot;
        traces[static_cast<std::size_t>(p)].arrivals.push_back({ev.t_ns + std::llround(skew_ns), slot_abs, ev.label});
      }
    }
    forward(node, lane, ev.link, ev);
  }
  for (auto& tr : traces) sort_trace(tr);
  return traces;
}

// ---------------------------------------------------------------------------

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Flooding: return "flooding";
    case AttackKind::Spoofing: return "spoofing";
    case AttackKind::Replay: return "replay";
    case AttackKind::HighSmpCnt: return "high_smpcnt";
    case AttackKind::Mitm: return "mitm";
  }
  return "none";
}

AttackKind attack_kind_from(const std::string& s) {
  for (auto k : {AttackKind::None, AttackKind::Flooding, AttackKind::Spoofing, AttackKind::Replay,
                 AttackKind::HighSmpCnt, AttackKind::Mitm})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown attack kind '" + s + "'");
}

void AttackScript::validate() const {
  if (kind == AttackKind::None) return;
  if (!(start_s < stop_s)) throw std::invalid_argument("attack start must precede stop");
  if (kind == AttackKind::Flooding && !(rate_hz > 0)) throw std::invalid_argument("flooding needs a positive rate");
  if (kind == AttackKind::Spoofing && jitter_s < 0) throw std::invalid_argument("spoofing jitter must be >= 0");
}

void inject_attack_frames(ScenarioTrace& trace, const AttackScript& attack, std::int64_t stream_start_ns,
                          std::uint64_t seed) {
  attack.validate();
  const std::int64_t start = stream_start_ns + std::llround(attack.start_s * 1e9);
  const std::int64_t stop = stream_start_ns + std::llround(attack.stop_s * 1e9);
  std::mt19937_64 rng(seed);
  const std::int64_t fs = trace.fs;
  std::vector<Arrival> extra;

  switch (attack.kind) {
    case AttackKind::None:
      return;
    case AttackKind::Mitm:
      apply_mitm(trace, attack.mitm, start, stop);
      return;
    case AttackKind::Flooding: {
      std::uniform_int_distribution<int> counter(0, trace.fs - 1);
      const double period_ns = 1e9 / attack.rate_hz;
      for (std::int64_t k = 0;; ++k) {
        const std::int64_t t = start + std::llround(static_cast<double>(k) * period_ns);
        if (t >= stop) break;
        const std::int64_t second = t >= 0 ? t / kNanosPerSecond : -((-t + kNanosPerSecond - 1) / kNanosPerSecond);
        extra.push_back({t, second * fs + counter(rng), Label::Malicious});
      }
      break;
    }
    case AttackKind::Spoofing: {
      std::normal_distribution<double> err(attack.error_s, attack.jitter_s);
      for (const auto& a : trace.arrivals)
        if (a.label == Label::Legitimate && a.t_ns >= start && a.t_ns < stop)
          extra.push_back({a.t_ns + std::llround(err(rng) * 1e9), a.slot, Label::Malicious});
      break;
    }
    case AttackKind::Replay: {
      const std::int64_t d = std::llround(attack.replay_delay_s * 1e9);
      for (const auto& a : trace.arrivals)
        if (a.label == Label::Legitimate && a.t_ns >= start && a.t_ns < stop)
          extra.push_back({a.t_ns + d, a.slot, Label::Malicious});
      break;
    }
    case AttackKind::HighSmpCnt: {
      const std::int64_t second = start / kNanosPerSecond;
      extra.push_back({start, second * fs + (fs - 1), Label::Malicious});
      break;
    }
  }
  trace.arrivals.insert(trace.arrivals.end(), extra.begin(), extra.end());
  sort_trace(trace);
}

std::vector<double> true_shifts(const ScenarioTrace& trace) {
  const StreamTiming timing(trace.fs);
  std::vector<double> out;
  out.reserve(trace.arrivals.size());
  for (const auto& a : trace.arrivals) {
    const std::int64_t second = a.slot / trace.fs;
    out.push_back(static_cast<double>(a.t_ns - timing.expected_ns(second, trace.smp_cnt(a))) * 1e-9);
  }
  return out;
}

namespace {

double skewness(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double m = 0;
  for (double v : y) m += v;
  m /= n;
  double s2 = 0, s3 = 0;
  for (double v : y) {
    const double d = v - m;
    s2 += d * d;
    s3 += d * d * d;
  }
  s2 /= n;
  s3 /= n;
  return s2 > 0 ? s3 / std::pow(s2, 1.5) : 0.0;
}

// (1 - beta) z + beta h(z), shifted and scaled back to zero mean, unit std.
std::vector<double> tilt(const std::vector<double>& z, double beta, double sign) {
  std::vector<double> y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double h = sign * std::exp(std::clamp(sign * z[i], -30.0, 30.0));
    y[i] = (1 - beta) * z[i] + beta * h;
  }
  const double n = static_cast<double>(y.size());
  double m = 0;
  for (double v : y) m += v;
  m /= n;
  double s2 = 0;
  for (double v : y) s2 += (v - m) * (v - m);
  const double sd = std::sqrt(s2 / n);
  for (auto& v : y) v = sd > 0 ? (v - m) / sd : 0.0;
  return y;
}

}  // namespace

MitmReport apply_mitm(ScenarioTrace& trace, const MitmDelta& delta, std::int64_t start_ns, std::int64_t stop_ns,
                      std::size_t width) {
  if (width == 0) throw std::invalid_argument("moving-average width must be positive");
  MitmReport rep;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < trace.arrivals.size(); ++i)
    if (trace.arrivals[i].t_ns >= start_ns && trace.arrivals[i].t_ns < stop_ns) idx.push_back(i);
  if (idx.empty()) return rep;
  rep.perturbed = idx.size();

  if (delta.dm_s == 0.0 && delta.ds == 0.0 && delta.dg == 0.0) {
    for (auto i : idx) trace.arrivals[i].label = Label::Malicious;
    return rep;
  }

  // The moving average only sees frames inside the interval, so successive
  // calls on adjacent intervals do not leak into each other.
  const auto x = true_shifts(trace);
  const std::size_t base = idx.front(), n = idx.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[base + i];
  auto moving_avg = [&](std::size_t i) {
    std::size_t lo = 0, hi = n;
    if (n > width) {
      lo = std::min(i >= width / 2 ? i - width / 2 : 0, n - width);
      hi = lo + width;
    }
    return (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  };

  std::vector<double> ma(idx.size()), r(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    ma[k] = moving_avg(idx[k] - base);
    r[k] = x[idx[k]] - ma[k];
  }
  const double cnt = static_cast<double>(r.size());
  double mean_r = 0;
  for (double v : r) mean_r += v;
  mean_r /= cnt;
  double var_r = 0;
  for (double v : r) var_r += (v - mean_r) * (v - mean_r);
  const double sd_r = std::sqrt(var_r / cnt);

  std::vector<double> z(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) z[k] = sd_r > 0 ? (r[k] - mean_r) / sd_r : 0.0;
  rep.skew_before = skewness(z);
  rep.skew_after = rep.skew_before;

  std::vector<double> y = z;
  if (delta.dg != 0.0 && sd_r > 0) {
    const double target = rep.skew_before * (1.0 + delta.dg);
    if (!(target > 0.0 && target < 2.0))
      throw std::domain_error("requested skewness " + std::to_string(target) + " is outside (0, 2)");
    const double sign = target > rep.skew_before ? 1.0 : -1.0;
    auto g = [&](double beta) { return skewness(tilt(z, beta, sign)); };
    double lo = 0.0, hi = 1.0;
    const double g_hi = g(hi);
    if ((g_hi - target) * sign < 0) throw std::domain_error("requested skewness change cannot be reached");
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((g(mid) - target) * sign < 0)
        lo = mid;
      else
        hi = mid;
    }
    rep.tilt = 0.5 * (lo + hi);
    y = tilt(z, rep.tilt, sign);
    rep.skew_after = skewness(y);
  }

  const StreamTiming timing(trace.fs);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto& a = trace.arrivals[idx[k]];
    const double rr = (sd_r > 0 ? mean_r + sd_r * y[k] : r[k]);
    const double xn = ma[k] + rr * (1.0 + delta.ds) + delta.dm_s;
    const std::int64_t second = a.slot / trace.fs;
    a.t_ns = timing.expected_ns(second, trace.smp_cnt(a)) + std::llround(xn * 1e9);
    a.label = Label::Malicious;
  }
  sort_trace(trace);
  return rep;
}

std::vector<int> ring_affected_points(int n_ieds, int compromised, bool self_report) {
  if (compromised < 1 || compromised > n_ieds) throw std::invalid_argument("compromised IED outside the ring");
  std::vector<int> out;
  for (int k = 1; k <= n_ieds; ++k) {
    const bool own = k == compromised && self_report;
    if (k > compromised || own) out.push_back(2 * (k - 1));
    if (k < compromised || own) out.push_back(2 * (k - 1) + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------

FrameTemplates::FrameTemplates(const StreamConfig& stream) {
  const MacAddress dst{0x01, 0x0c, 0xcd, 0x04, 0x00, 0x01};
  const MacAddress src{0x00, 0x1a, 0x2b, 0x3c, 0x4d, 0x5e};
  frames_.reserve(static_cast<std::size_t>(stream.fs));
  for (int c = 0; c < stream.fs; ++c) {
    SvFrame f;
    f.dst_mac = dst;
    f.src_mac = src;
    f.sv_id = stream.sv_id;
    f.smp_cnt = static_cast<std::uint16_t>(c);
    const double wt = 2 * std::numbers::pi * 50.0 * c / stream.fs;
    for (std::size_t k = 0; k < kSampleCount; ++k) {
      const double amp = k < 4 ? 1000.0 : 100000.0;
      const double ph = -2 * std::numbers::pi * static_cast<double>(k % 4) / 3.0;
      f.samples[k].value = k % 4 == 3 ? 0 : static_cast<std::int32_t>(std::lround(amp * std::sin(wt + ph)));
    }
    bytes_.push_back(encode(f));
    hex_.push_back(to_hex(bytes_.back()));
    frames_.push_back(std::move(f));
  }
}

std::vector<TraceRecord> to_records(const ScenarioTrace& trace, const FrameTemplates& templates, std::uint16_t port) {
  std::vector<TraceRecord> out;
  out.reserve(trace.arrivals.size());
  for (const auto& a : trace.arrivals) out.push_back({a.t_ns, port, a.label, templates.hex(trace.smp_cnt(a))});
  return out;
}

// ---------------------------------------------------------------------------

LinkLatency latency_from_json(const nlohmann::json& j) {
  LinkLatency l;
  l.mu_s = j.value("mu_us", 0.0) * 1e-6;
  l.sigma_s = j.value("sigma_us", 0.0) * 1e-6;
  l.tau_s = j.value("tau_us", 0.0) * 1e-6;
  l.clip_sigmas = j.value("clip_sigmas", 0.0);
  return l;
}

Wander wander_from_json(const nlohmann::json& j) {
  return Wander{j.value("amplitude_us", 0.0) * 1e-6, j.value("period_s", 0.0)};
}

ClockModel clock_from_json(const nlohmann::json& j) {
  return ClockModel{j.value("drift_us_per_s", 0.0), j.value("offset_us", 0.0)};
}

AttackScript attack_from_json(const nlohmann::json& j) {
  AttackScript a;
  a.kind = attack_kind_from(j.value("kind", std::string("none")));
  a.start_s = j.value("start_s", 0.0);
  a.stop_s = j.value("stop_s", 0.0);
  a.rate_hz = j.value("rate_hz", 0.0);
  a.error_s = j.value("error_us", 0.0) * 1e-6;
  a.jitter_s = j.value("jitter_us", 0.0) * 1e-6;
  a.replay_delay_s = j.value("replay_delay_ms", 0.0) * 1e-3;
  a.spoof_mode = j.value("spoof_mode", std::string("path"));
  if (a.spoof_mode != "path" && a.spoof_mode != "trace") throw std::invalid_argument("spoof_mode must be path or trace");
  a.mitm.dm_s = j.value("dm_us", 0.0) * 1e-6;
  a.mitm.ds = j.value("ds", 0.0);
  a.mitm.dg = j.value("dg", 0.0);
  a.compromised = j.value("compromised", 0);
  a.self_report_probability = j.value("self_report_probability", 0.5);
  a.validate();
  return a;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario sc;
  sc.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("stream")) {
    const auto& s = j["stream"];
    sc.stream.fs = s.value("fs", 4800);
    sc.stream.sv_id = s.value("sv_id", std::string("MU01"));
    sc.stream.duration_s = s.value("duration_s", 10.0);
    sc.stream.start_second = s.value("start_second", std::int64_t{0});
  }
  const auto topo = j.value("topology", nlohmann::json::object());
  const std::string kind = topo.value("kind", std::string("star"));
  const auto hop = latency_from_json(topo.value("hop", nlohmann::json::object()));
  const auto wander = wander_from_json(topo.value("wander", nlohmann::json::object()));
  if (kind == "star") {
    sc.topology = star_topology(hop, wander, clock_from_json(topo.value("clock", nlohmann::json::object())));
  } else if (kind == "ring") {
    std::vector<ClockModel> clocks;
    for (const auto& c : topo.value("clocks", nlohmann::json::array())) clocks.push_back(clock_from_json(c));
    sc.topology = hsr_ring(topo.value("ieds", 5), hop, wander, clocks);
  } else if (kind == "custom") {
    Topology t;
    std::map<std::string, int> ids;
    for (const auto& n : topo.at("nodes")) {
      const auto name = n.at("name").get<std::string>();
      ids[name] = t.add_node(name, n.value("observe", false), clock_from_json(n.value("clock", nlohmann::json::object())));
    }
    auto id = [&](const std::string& name) {
      auto it = ids.find(name);
      if (it == ids.end()) throw std::invalid_argument("unknown node '" + name + "'");
      return it->second;
    };
    for (const auto& l : topo.at("links"))
      t.links.push_back({id(l.at("from").get<std::string>()), id(l.at("to").get<std::string>()), l.value("lane", 0),
                         latency_from_json(l.value("latency", nlohmann::json::object())),
                         wander_from_json(l.value("wander", nlohmann::json::object()))});
    t.publisher = id(topo.at("publisher").get<std::string>());
    sc.topology = std::move(t);
  } else {
    throw std::invalid_argument("unknown topology kind '" + kind + "'");
  }
  sc.attack = attack_from_json(j.value("attack", nlohmann::json::object()));
  return sc;
}

PathAttacker path_attacker(const Topology& topo, const AttackScript& a, std::int64_t stream_start_ns) {
  const Link* first = nullptr;
  for (const auto& l : topo.links)
    if (l.from == topo.publisher) {
      first = &l;
      break;
    }
  if (!first) throw std::invalid_argument("publisher has no outgoing link");
  PathAttacker p;
  p.node = first->to;
  p.lane = first->lane;
  p.latency = first->latency;
  p.error_s = a.error_s;
  p.jitter_s = a.jitter_s;
  p.start_ns = stream_start_ns + std::llround(a.start_s * 1e9);
  p.stop_ns = stream_start_ns + std::llround(a.stop_s * 1e9);
  return p;
}

ScenarioResult run_scenario(const Scenario& sc) {
  ScenarioResult res;
  res.points = sc.topology.observation_points();
  const std::int64_t t0 = sc.stream.start_second * kNanosPerSecond;
  const auto& a = sc.attack;
  if (a.kind == AttackKind::Spoofing && a.spoof_mode == "path") {
    res.traces = simulate(sc.topology, sc.stream, sc.seed, path_attacker(sc.topology, a, t0));
    return res;
  }
  res.traces = simulate(sc.topology, sc.stream, sc.seed);
  if (a.kind == AttackKind::Mitm && sc.topology.ring_ieds > 0) {
    std::mt19937_64 coin(derive_seed(sc.seed, 0xC0));
    res.self_report = std::uniform_real_distribution<double>(0, 1)(coin) < a.self_report_probability;
    for (int p : ring_affected_points(sc.topology.ring_ieds, a.compromised, res.self_report))
      apply_mitm(res.traces[static_cast<std::size_t>(p)], a.mitm, t0 + std::llround(a.start_s * 1e9),
                 t0 + std::llround(a.stop_s * 1e9));
    return res;
  }
  for (std::size_t p = 0; p < res.traces.size(); ++p)
    inject_attack_frames(res.traces[p], a, t0, derive_seed(sc.seed, 0x1000 + p));
  return res;
}

}  // namespace svguard::sim

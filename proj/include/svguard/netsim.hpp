#pragma once

// Discrete-event simulation of one SV stream crossing a network of
// store-and-forward nodes, plus the attack generators that act on the
// resulting subscriber traces.
//
// A publisher emits frame (i, c) at true time i + c/fs. Every directed link
// adds an independent EMG draw plus an optional slow sinusoidal wander.
// Links carry a lane id; a node forwards a frame only onto outgoing links of
// the lane it arrived on, which is enough to express a star and both
// directions of an HSR ring. Observation points are (node, lane) pairs and
// timestamp arrivals with the node's drifting clock.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "svguard/capture_io.hpp"
#include "svguard/sv_codec.hpp"

namespace svguard::sim {

/// SplitMix64 of (master, index); seeds independent generators.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct LinkLatency {
  double mu_s = 0.0;
  double sigma_s = 0.0;
  double tau_s = 0.0;  // 0: no exponential component
  // Draws further than clip_sigmas * sqrt(sigma^2 + tau^2) from the mean are
  // redrawn. 0 disables clipping.
  double clip_sigmas = 0.0;
};

/// amplitude * sin(2 pi t / period + phase); the phase is drawn per link.
struct Wander {
  double amplitude_s = 0.0;
  double period_s = 0.0;
};

struct ClockModel {
  double drift_us_per_s = 0.0;  // holdover
  double offset_us = 0.0;
};

struct Node {
  std::string name;
  bool observe = false;
  ClockModel clock;
};

struct Link {
  int from = 0;
  int to = 0;
  int lane = 0;
  LinkLatency latency;
  Wander wander;
};

struct ObservationPoint {
  int node = 0;
  int lane = 0;
  std::string name;  // "<node>" or "<node>/<lane>"
};

struct Topology {
  std::vector<Node> nodes;
  std::vector<Link> links;
  int publisher = 0;
  int ring_ieds = 0;  // set by hsr_ring

  int add_node(std::string name, bool observe = false, ClockModel clock = {});
  /// Observation points in (node, lane) order. Lanes are those of the
  /// node's incoming links.
  std::vector<ObservationPoint> observation_points() const;
  /// Throws std::invalid_argument for dangling links, negative mean
  /// latency, or an observation point the publisher cannot reach.
  void validate() const;
};

/// publisher -> switch -> subscriber; the subscriber is the only observer.
Topology star_topology(const LinkLatency& hop, const Wander& wander = {}, const ClockModel& subscriber_clock = {});

/// QuadBox feeding an HSR ring of n IEDs. Lane 0 runs QuadBox -> IED1 ->
/// ... -> IEDn, lane 1 runs QuadBox -> IEDn -> ... -> IED1. Every IED
/// observes both lanes, so observation point 2(k-1) + lane belongs to IED k.
Topology hsr_ring(int n_ieds, const LinkLatency& hop, const Wander& wander = {},
                  std::span<const ClockModel> clocks = {});

struct StreamConfig {
  int fs = 4800;
  std::string sv_id = "MU01";
  double duration_s = 10.0;
  std::int64_t start_second = 0;
};

struct Arrival {
  std::int64_t t_ns = 0;  // observer clock
  std::int64_t slot = 0;  // second * fs + smp_cnt of the frame carried
  Label label = Label::Legitimate;
};

struct ScenarioTrace {
  std::string observer;
  int fs = 4800;
  std::vector<Arrival> arrivals;  // sorted by t_ns

  int smp_cnt(const Arrival& a) const { return static_cast<int>(a.slot % fs); }
  std::size_t count(Label label) const;
};

/// A second publisher wired into `node`. It emits a byte-identical copy of
/// every slot inside [start_ns, stop_ns) at the slot time plus a
/// N(error, jitter^2) offset; copies cross `latency` to reach the node and
/// then follow the legitimate forwarding path.
struct PathAttacker {
  int node = 1;
  int lane = 0;
  LinkLatency latency;
  double error_s = 0.0;
  double jitter_s = 0.0;
  std::int64_t start_ns = 0;
  std::int64_t stop_ns = 0;
};

/// Runs the event loop. Deterministic in (topology, stream, seed, attacker).
/// Returns one trace per observation point.
std::vector<ScenarioTrace> simulate(const Topology& topo, const StreamConfig& stream, std::uint64_t seed,
                                    const std::optional<PathAttacker>& attacker = std::nullopt);

/// Draws from a link's latency model, for moment checks.
double draw_latency(const LinkLatency& l, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Attacks

enum class AttackKind { None, Flooding, Spoofing, Replay, HighSmpCnt, Mitm };
const char* to_string(AttackKind k);
AttackKind attack_kind_from(const std::string& s);

struct MitmDelta {
  double dm_s = 0.0;  // added to the mean
  double ds = 0.0;    // relative change of the std, 0.1 = +10%
  double dg = 0.0;    // relative change of the skewness
};

struct AttackScript {
  AttackKind kind = AttackKind::None;
  double start_s = 0.0;  // relative to the stream start
  double stop_s = 0.0;
  double rate_hz = 0.0;          // flooding
  double error_s = 0.0;          // spoofing: mean shift of malicious vs legitimate arrival
  double jitter_s = 0.0;         // spoofing: std of that shift
  double replay_delay_s = 0.0;   // replay
  // Spoofing: "path" injects from a second publisher at the first hop inside
  // the simulation; "trace" duplicates subscriber arrivals with the offset.
  std::string spoof_mode = "path";
  MitmDelta mitm;
  int compromised = 0;  // mitm on a ring: IED index, 1-based
  // Probability that the compromised IED's own observation points are
  // perturbed too.
  double self_report_probability = 0.5;

  /// Throws std::invalid_argument unless start < stop (for kind != None).
  void validate() const;
};

/// Adds attacker frames to `trace` and re-sorts it. Labels added frames
/// malicious. `stream_start_ns` anchors start_s/stop_s.
void inject_attack_frames(ScenarioTrace& trace, const AttackScript& attack, std::int64_t stream_start_ns,
                          std::uint64_t seed);

struct MitmReport {
  std::size_t perturbed = 0;
  double tilt = 0.0;        // exponential-tilt mixing weight found by bisection
  double skew_before = 0.0; // residual skewness inside the interval
  double skew_after = 0.0;
};

/// Rewrites arrivals inside [start_ns, stop_ns): with the centred moving
/// average ma of the interval's shifts (`width` frames), the residual r = x - ma is
/// tilted towards the requested relative skewness change, then
/// x' = ma + r (1 + ds) + dm. Frame count is preserved and perturbed frames
/// are relabelled malicious. Throws std::domain_error when the target
/// skewness leaves (0, 2) or cannot be reached.
MitmReport apply_mitm(ScenarioTrace& trace, const MitmDelta& delta, std::int64_t start_ns, std::int64_t stop_ns,
                      std::size_t width = 200);

/// Per-frame shifts of a trace using the ground-truth slot of each arrival.
std::vector<double> true_shifts(const ScenarioTrace& trace);

/// Which ring observation points a MitM at IED `compromised` (1-based)
/// alters: lane-0 points after it, lane-1 points before it, and its own two
/// points when `self_report` is set.
std::vector<int> ring_affected_points(int n_ieds, int compromised, bool self_report);

// ---------------------------------------------------------------------------
// Frames and configuration

/// Deterministic frame content for each counter value; attacker copies are
/// byte-identical to legitimate frames.
class FrameTemplates {
 public:
  explicit FrameTemplates(const StreamConfig& stream);
  const SvFrame& frame(int smp_cnt) const { return frames_.at(static_cast<std::size_t>(smp_cnt)); }
  const std::vector<std::uint8_t>& bytes(int smp_cnt) const { return bytes_.at(static_cast<std::size_t>(smp_cnt)); }
  const std::string& hex(int smp_cnt) const { return hex_.at(static_cast<std::size_t>(smp_cnt)); }

 private:
  std::vector<SvFrame> frames_;
  std::vector<std::vector<std::uint8_t>> bytes_;
  std::vector<std::string> hex_;
};

std::vector<TraceRecord> to_records(const ScenarioTrace& trace, const FrameTemplates& templates,
                                    std::uint16_t port = 0);

struct Scenario {
  Topology topology;
  StreamConfig stream;
  AttackScript attack;
  std::uint64_t seed = 1;
};

/// Parses the scenario JSON (see README for the schema).
Scenario scenario_from_json(const nlohmann::json& j);
LinkLatency latency_from_json(const nlohmann::json& j);
Wander wander_from_json(const nlohmann::json& j);
ClockModel clock_from_json(const nlohmann::json& j);
AttackScript attack_from_json(const nlohmann::json& j);

/// Spoofing attacker sitting next to the publisher's first hop and
/// replicating that hop's latency model.
PathAttacker path_attacker(const Topology& topo, const AttackScript& a, std::int64_t stream_start_ns);

struct ScenarioResult {
  std::vector<ObservationPoint> points;
  std::vector<ScenarioTrace> traces;
  bool self_report = false;  // coin flip for the compromised IED
};

/// simulate() followed by the scripted attack on every observed trace.
/// MitM on a ring perturbs only ring_affected_points; elsewhere every trace.
ScenarioResult run_scenario(const Scenario& sc);

}  // namespace svguard::sim

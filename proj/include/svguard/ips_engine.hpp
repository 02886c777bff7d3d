#pragma once

// Per-stream intrusion prevention engine.
//
// Every frame is gated on its arrival-time shift against the current EMG fit,
// checked against the per-second set of accepted counters, and then staged in
// a buffer keyed by slot where frames with the same counter duel on EMG
// likelihood. A staged frame is released once its expiration time has passed;
// released shifts feed the moment update.
//
// The engine is single-context: call ingest/release_due/maybe_reestimate from
// one thread. The current EMG fit is additionally published as an immutable
// snapshot that other threads may read at any time.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "svguard/emg_model.hpp"
#include "svguard/sv_codec.hpp"

namespace svguard {

enum class Decision : std::uint8_t {
  Accepted,
  DiscardedFlood,
  DiscardedReplay,
  DiscardedOutscored,
  DiscardedLatency,
  DiscardedMalformed,
};

const char* to_string(Decision d);
inline bool is_discard(Decision d) { return d != Decision::Accepted; }

struct Verdict {
  std::uint64_t frame_id = 0;
  int smp_cnt = -1;
  Decision decision = Decision::Accepted;
  std::int64_t decision_time_ns = 0;
  double f_as_s = 0.0;
  double f_p = 0.0;
  bool warmup = false;
};

/// {"t":<ns>,"smpCnt":<int>,"decision":"...","f_as_us":<float>,"f_p":<float>}
void write_verdict(std::ostream& out, const Verdict& v);

struct EngineConfig {
  int fs = 4800;
  std::size_t batch_size = 1000;  // k, accepted shifts per re-estimation
  std::size_t warmup_frames = 4800;
  double flood_gate_sigmas = 5.0;
  double expiry_sigmas = 3.0;
  double latency_budget_s = 3e-3;
};

struct StagedFrame {
  ArrivedFrame frame;
  std::uint64_t frame_id = 0;
  std::int64_t slot = 0;  // second_index * fs + smp_cnt
  double f_as = 0.0;
  double f_p = 0.0;
  std::int64_t f_exp_ns = 0;  // 0: eligible immediately
};

struct ReleasedFrame {
  ArrivedFrame frame;
  Verdict verdict;
};

struct FrameTime {
  std::int64_t arrival_ns = 0;
  int smp_cnt = 0;
};

/// Cold-start fit from an attack-free prefix. Shifts are unwrapped around the
/// median of their naive (zero-mean) values, then fitted by moments with the
/// variance floored at kVarianceFloor. Throws std::invalid_argument when
/// n_warm < 100 or fewer than n_warm frames are given.
EmgParams warm_up(std::span<const FrameTime> first_frames, std::size_t n_warm, const StreamTiming& timing);
EmgParams warm_up(std::span<const ArrivedFrame> first_frames, std::size_t n_warm, const StreamTiming& timing);

/// Per-second accepted counters for the two most recent seconds.
class AcceptedSlots {
 public:
  explicit AcceptedSlots(int fs);
  /// True when (second, c) was accepted, or when `second` is older than the
  /// tracked window.
  bool seen(std::int64_t second, int c) const;
  void insert(std::int64_t second, int c);
  void clear();

 private:
  int fs_;
  std::int64_t seconds_[2];
  std::vector<std::uint64_t> bits_[2];
};

/// Ring of the last k accepted shifts.
class AcceptedBuffer {
 public:
  explicit AcceptedBuffer(std::size_t capacity);
  void push(double f_as);
  std::size_t capacity() const { return ring_.size(); }
  std::size_t pending() const { return pending_; }
  std::size_t size() const { return size_; }
  /// Contents, oldest first.
  std::vector<double> contents() const;
  void mark_consumed() { pending_ = 0; }

 private:
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::size_t pending_ = 0;
};

class ParamsSnapshot {
 public:
  void publish(const EmgParams& p);
  std::shared_ptr<const EmgParams> load() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const EmgParams> current_;
};

struct EngineCounters {
  std::uint64_t ingested = 0;
  std::uint64_t accepted = 0;
  std::uint64_t flood = 0;
  std::uint64_t replay = 0;
  std::uint64_t outscored = 0;
  std::uint64_t latency = 0;
  std::uint64_t malformed = 0;
  std::uint64_t reestimates = 0;
  std::uint64_t clamp_events = 0;
};

class IpsEngine {
 public:
  using VerdictSink = std::function<void(const Verdict&)>;
  using AcceptedHook = std::function<void(double f_as, std::int64_t arrival_ns)>;

  explicit IpsEngine(EngineConfig cfg);

  /// Skips warm-up and starts from `params`.
  IpsEngine(EngineConfig cfg, const EmgParams& params);

  void set_verdict_sink(VerdictSink sink) { sink_ = std::move(sink); }
  void set_accepted_hook(AcceptedHook hook) { accepted_hook_ = std::move(hook); }

  /// Gates and stages a frame. Returns the verdict when it is decided
  /// immediately (discard, or acceptance during warm-up).
  std::optional<Verdict> ingest(ArrivedFrame frame);
  /// Decodes `bytes` first; undecodable frames get DiscardedMalformed.
  std::optional<Verdict> ingest_bytes(std::span<const std::uint8_t> bytes, std::int64_t arrival_ns,
                                      std::uint16_t port = 0);

  /// Accepts every staged frame with f_exp == 0 or f_exp < now_ns, in slot
  /// order, appending them to `out`.
  void release_due(std::int64_t now_ns, std::vector<ReleasedFrame>& out);
  std::vector<ReleasedFrame> release_due(std::int64_t now_ns);

  /// Refits once k accepted shifts have accumulated since the last fit.
  std::optional<EmgParams> maybe_reestimate();

  /// release_due(t); ingest; release_due(t); maybe_reestimate. Deterministic
  /// single-context driver used by the simulator and benchmarks.
  void process(ArrivedFrame frame, std::vector<ReleasedFrame>& out);
  /// Releases everything still staged.
  void flush(std::vector<ReleasedFrame>& out);

  bool warming_up() const { return warming_up_; }
  const EmgParams& params() const { return params_; }
  std::shared_ptr<const EmgParams> params_snapshot() const { return snapshot_.load(); }
  const EngineConfig& config() const { return cfg_; }
  const StreamTiming& timing() const { return timing_; }
  const EngineCounters& counters() const { return counters_; }
  const std::vector<StagedFrame>& staging() const { return staging_; }
  const AcceptedBuffer& accepted_buffer() const { return accepted_; }

 private:
  void install(const EmgParams& p);
  std::optional<Verdict> ingest_warmup(ArrivedFrame frame, std::uint64_t id);
  void finish_warmup();
  Verdict emit(Verdict v);
  std::optional<Verdict> discard(std::uint64_t id, const ArrivedFrame& f, Decision d, double f_as, double f_p);
  void accept(StagedFrame&& s, std::vector<ReleasedFrame>& out);

  EngineConfig cfg_;
  StreamTiming timing_;
  EmgParams params_;
  double expected_shift_ = 0.0;
  double full_std_ = 0.0;
  double pdf_at_expected_ = 0.0;
  ParamsSnapshot snapshot_;

  bool warming_up_ = true;
  std::vector<FrameTime> warm_frames_;
  std::vector<ReleasedFrame> warm_ready_;

  std::vector<StagedFrame> staging_;
  AcceptedBuffer accepted_;
  AcceptedSlots slots_;

  std::uint64_t next_id_ = 0;
  EngineCounters counters_;
  VerdictSink sink_;
  AcceptedHook accepted_hook_;
};

}  // namespace svguard

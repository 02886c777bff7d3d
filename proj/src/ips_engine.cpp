#include "svguard/ips_engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace svguard {

const char* to_string(Decision d) {
  switch (d) {
    case Decision::Accepted: return "accepted";
    case Decision::DiscardedFlood: return "discarded_flood";
    case Decision::DiscardedReplay: return "discarded_replay";
    case Decision::DiscardedOutscored: return "discarded_outscored";
    case Decision::DiscardedLatency: return "discarded_latency";
    case Decision::DiscardedMalformed: return "discarded_malformed";
  }
  return "unknown";
}

void write_verdict(std::ostream& out, const Verdict& v) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "{\"t\":%" PRId64 ",\"smpCnt\":%d,\"decision\":\"%s\",\"f_as_us\":%.3f,\"f_p\":%.9g}\n",
                v.decision_time_ns, v.smp_cnt, to_string(v.decision), v.f_as_s * 1e6, v.f_p);
  out << buf;
}

// ---------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

EmgParams warm_up(std::span<const FrameTime> frames, std::size_t n_warm, const StreamTiming& timing) {
  if (n_warm < 100) throw std::invalid_argument("warm-up needs at least 100 frames");
  if (frames.size() < n_warm)
    throw std::invalid_argument("warm-up needs " + std::to_string(n_warm) + " frames, got " +
                                std::to_string(frames.size()));
  frames = frames.first(n_warm);

  std::vector<double> shifts(n_warm);
  for (std::size_t i = 0; i < n_warm; ++i)
    shifts[i] = arrival_shift(frames[i].arrival_ns, frames[i].smp_cnt, timing, 0.0).shift_s;
  const double seed = median(shifts);
  for (std::size_t i = 0; i < n_warm; ++i)
    shifts[i] = arrival_shift(frames[i].arrival_ns, frames[i].smp_cnt, timing, seed).shift_s;

  const auto m = batch_moments(shifts);
  EmgParams p = estimate_mme(m.m1, std::max(m.m2, kVarianceFloor), m.m3);
  if (m.m2 < kVarianceFloor) p.clamped = true;
  return p;
}

EmgParams warm_up(std::span<const ArrivedFrame> frames, std::size_t n_warm, const StreamTiming& timing) {
  std::vector<FrameTime> times;
  times.reserve(frames.size());
  for (const auto& f : frames) times.push_back({f.arrival_ns, f.frame.smp_cnt});
  return warm_up(std::span<const FrameTime>(times), n_warm, timing);
}

// ---------------------------------------------------------------------------

AcceptedSlots::AcceptedSlots(int fs) : fs_(fs) { clear(); }

void AcceptedSlots::clear() {
  const std::size_t words = (static_cast<std::size_t>(fs_) + 63) / 64;
  for (int k = 0; k < 2; ++k) {
    seconds_[k] = std::numeric_limits<std::int64_t>::min();
    bits_[k].assign(words, 0);
  }
}

bool AcceptedSlots::seen(std::int64_t second, int c) const {
  for (int k = 0; k < 2; ++k)
    if (seconds_[k] == second) return (bits_[k][static_cast<std::size_t>(c) / 64] >> (c % 64)) & 1u;
  const std::int64_t oldest = std::min(seconds_[0], seconds_[1]);
  const std::int64_t newest = std::max(seconds_[0], seconds_[1]);
  // Seconds behind the tracked pair can no longer be verified.
  return newest != std::numeric_limits<std::int64_t>::min() && second < oldest;
}

void AcceptedSlots::insert(std::int64_t second, int c) {
  int k = seconds_[0] == second ? 0 : seconds_[1] == second ? 1 : -1;
  if (k < 0) {
    k = seconds_[0] <= seconds_[1] ? 0 : 1;
    if (second < seconds_[k]) return;  // older than both tracked seconds
    seconds_[k] = second;
    std::fill(bits_[k].begin(), bits_[k].end(), 0);
  }
  bits_[k][static_cast<std::size_t>(c) / 64] |= std::uint64_t{1} << (c % 64);
}

AcceptedBuffer::AcceptedBuffer(std::size_t capacity) : ring_(capacity) {
  if (capacity == 0) throw std::invalid_argument("accepted buffer capacity must be positive");
}

void AcceptedBuffer::push(double f_as) {
  ring_[head_] = f_as;
  head_ = (head_ + 1) % ring_.size();
  size_ = std::min(size_ + 1, ring_.size());
  ++pending_;
}

std::vector<double> AcceptedBuffer::contents() const {
  std::vector<double> out;
  out.reserve(size_);
  const std::size_t start = (head_ + ring_.size() - size_) % ring_.size();
  for (std::size_t i = 0; i < size_; ++i) out.push_back(ring_[(start + i) % ring_.size()]);
  return out;
}

void ParamsSnapshot::publish(const EmgParams& p) {
  auto next = std::make_shared<const EmgParams>(p);
  std::lock_guard lock(mu_);
  current_ = std::move(next);
}

std::shared_ptr<const EmgParams> ParamsSnapshot::load() const {
  std::lock_guard lock(mu_);
  return current_;
}

// ---------------------------------------------------------------------------

IpsEngine::IpsEngine(EngineConfig cfg)
    : cfg_(cfg), timing_(cfg.fs), accepted_(cfg.batch_size), slots_(cfg.fs) {
  if (cfg_.warmup_frames < 100) throw std::invalid_argument("warm-up needs at least 100 frames");
  warm_frames_.reserve(cfg_.warmup_frames);
}

IpsEngine::IpsEngine(EngineConfig cfg, const EmgParams& params)
    : cfg_(cfg), timing_(cfg.fs), accepted_(cfg.batch_size), slots_(cfg.fs) {
  warming_up_ = false;
  install(params);
}

void IpsEngine::install(const EmgParams& p) {
  params_ = p;
  expected_shift_ = p.expected_value();
  full_std_ = p.full_std();
  pdf_at_expected_ = emg_pdf(expected_shift_, p);
  if (p.clamped) ++counters_.clamp_events;
  snapshot_.publish(p);
}

Verdict IpsEngine::emit(Verdict v) {
  if (sink_) sink_(v);
  return v;
}

std::optional<Verdict> IpsEngine::discard(std::uint64_t id, const ArrivedFrame& f, Decision d, double f_as,
                                          double f_p) {
  switch (d) {
    case Decision::DiscardedFlood: ++counters_.flood; break;
    case Decision::DiscardedReplay: ++counters_.replay; break;
    case Decision::DiscardedOutscored: ++counters_.outscored; break;
    case Decision::DiscardedLatency: ++counters_.latency; break;
    case Decision::DiscardedMalformed: ++counters_.malformed; break;
    case Decision::Accepted: break;
  }
  return emit(Verdict{id, f.frame.smp_cnt, d, f.arrival_ns, f_as, f_p, warming_up_});
}

std::optional<Verdict> IpsEngine::ingest_bytes(std::span<const std::uint8_t> bytes, std::int64_t arrival_ns,
                                               std::uint16_t port) {
  auto decoded = decode(bytes);
  if (auto* frame = std::get_if<SvFrame>(&decoded)) return ingest(ArrivedFrame{std::move(*frame), arrival_ns, port});
  ++counters_.ingested;
  ArrivedFrame bad;
  bad.arrival_ns = arrival_ns;
  bad.frame.smp_cnt = 0;
  auto v = discard(next_id_++, bad, Decision::DiscardedMalformed, 0.0, 0.0);
  v->smp_cnt = -1;
  return v;
}

std::optional<Verdict> IpsEngine::ingest(ArrivedFrame frame) {
  ++counters_.ingested;
  const std::uint64_t id = next_id_++;
  const int c = frame.frame.smp_cnt;
  if (!timing_.valid_counter(c)) return discard(id, frame, Decision::DiscardedMalformed, 0.0, 0.0);
  if (warming_up_) return ingest_warmup(std::move(frame), id);

  const ArrivalShift shift = arrival_shift(frame.arrival_ns, c, timing_, expected_shift_);
  const double f_as = shift.shift_s;
  const double deviation = f_as - expected_shift_;

  if (deviation > cfg_.latency_budget_s) return discard(id, frame, Decision::DiscardedLatency, f_as, 0.0);
  if (std::abs(deviation) >= cfg_.flood_gate_sigmas * full_std_)
    return discard(id, frame, Decision::DiscardedFlood, f_as, 0.0);
  if (slots_.seen(shift.second_index, c)) return discard(id, frame, Decision::DiscardedReplay, f_as, 0.0);

  const double f_p = emg_pdf(f_as, params_);
  std::int64_t f_exp = 0;
  if (f_as < expected_shift_) {
    double hold = expected_shift_ - f_as;
    if (f_p < pdf_at_expected_) hold += cfg_.expiry_sigmas * full_std_;
    f_exp = frame.arrival_ns + std::max<std::int64_t>(1, std::llround(hold * 1e9));
  }

  const std::int64_t slot = shift.second_index * timing_.fs() + c;
  StagedFrame staged{std::move(frame), id, slot, f_as, f_p, f_exp};

  if (staging_.empty() || staging_.back().slot < slot) {
    staging_.push_back(std::move(staged));
    return std::nullopt;
  }
  for (auto it = staging_.begin(); it != staging_.end(); ++it) {
    if (it->slot > slot) {
      staging_.insert(it, std::move(staged));
      return std::nullopt;
    }
    if (it->slot == slot) {
      // Strictly higher likelihood wins; ties keep the frame already staged.
      if (it->f_p < f_p) {
        StagedFrame loser = std::move(*it);
        *it = std::move(staged);
        return discard(loser.frame_id, loser.frame, Decision::DiscardedOutscored, loser.f_as, loser.f_p);
      }
      return discard(staged.frame_id, staged.frame, Decision::DiscardedOutscored, f_as, f_p);
    }
  }
  return std::nullopt;  // unreachable: the back entry has slot >= this one
}

std::optional<Verdict> IpsEngine::ingest_warmup(ArrivedFrame frame, std::uint64_t id) {
  const int c = frame.frame.smp_cnt;
  const ArrivalShift shift = arrival_shift(frame.arrival_ns, c, timing_, 0.0);
  if (slots_.seen(shift.second_index, c)) return discard(id, frame, Decision::DiscardedReplay, shift.shift_s, 0.0);
  slots_.insert(shift.second_index, c);
  ++counters_.accepted;

  Verdict v{id, c, Decision::Accepted, frame.arrival_ns, shift.shift_s, 0.0, true};
  warm_frames_.push_back({frame.arrival_ns, c});
  warm_ready_.push_back(ReleasedFrame{std::move(frame), v});
  if (warm_frames_.size() >= cfg_.warmup_frames) finish_warmup();
  return emit(v);
}

void IpsEngine::finish_warmup() {
  install(warm_up(std::span<const FrameTime>(warm_frames_), cfg_.warmup_frames, timing_));
  slots_.clear();
  for (const auto& f : warm_frames_)
    slots_.insert(arrival_shift(f.arrival_ns, f.smp_cnt, timing_, expected_shift_).second_index, f.smp_cnt);
  warming_up_ = false;
  warm_frames_.clear();
  warm_frames_.shrink_to_fit();
}

void IpsEngine::accept(StagedFrame&& s, std::vector<ReleasedFrame>& out) {
  ++counters_.accepted;
  slots_.insert(s.slot >= 0 ? s.slot / timing_.fs() : -((-s.slot + timing_.fs() - 1) / timing_.fs()),
                s.frame.frame.smp_cnt);
  accepted_.push(s.f_as);
  if (accepted_hook_) accepted_hook_(s.f_as, s.frame.arrival_ns);
  const std::int64_t t = s.f_exp_ns == 0 ? s.frame.arrival_ns : s.f_exp_ns + 1;
  Verdict v = emit(Verdict{s.frame_id, s.frame.frame.smp_cnt, Decision::Accepted, t, s.f_as, s.f_p, false});
  out.push_back(ReleasedFrame{std::move(s.frame), v});
}

void IpsEngine::release_due(std::int64_t now_ns, std::vector<ReleasedFrame>& out) {
  for (auto& r : warm_ready_) {
    if (accepted_hook_) accepted_hook_(r.verdict.f_as_s, r.frame.arrival_ns);
    out.push_back(std::move(r));
  }
  warm_ready_.clear();

  auto keep = staging_.begin();
  for (auto it = staging_.begin(); it != staging_.end(); ++it) {
    if (it->f_exp_ns == 0 || it->f_exp_ns < now_ns) {
      accept(std::move(*it), out);
    } else {
      if (keep != it) *keep = std::move(*it);
      ++keep;
    }
  }
  staging_.erase(keep, staging_.end());
}

std::vector<ReleasedFrame> IpsEngine::release_due(std::int64_t now_ns) {
  std::vector<ReleasedFrame> out;
  release_due(now_ns, out);
  return out;
}

std::optional<EmgParams> IpsEngine::maybe_reestimate() {
  if (warming_up_ || accepted_.pending() < accepted_.capacity()) return std::nullopt;
  const auto batch = accepted_.contents();
  accepted_.mark_consumed();
  install(update_moments(params_, batch, cfg_.fs));
  ++counters_.reestimates;
  return params_;
}

void IpsEngine::process(ArrivedFrame frame, std::vector<ReleasedFrame>& out) {
  const std::int64_t t = frame.arrival_ns;
  release_due(t, out);
  ingest(std::move(frame));
  release_due(t, out);
  maybe_reestimate();
}

void IpsEngine::flush(std::vector<ReleasedFrame>& out) {
  release_due(std::numeric_limits<std::int64_t>::max(), out);
  maybe_reestimate();
}

}  // namespace svguard

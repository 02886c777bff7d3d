#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "svguard/ips_engine.hpp"

using namespace svguard;

namespace {

constexpr int kFs = 4800;

// E = 105 us, full std = sqrt(50) us ~ 7.07 us.
EmgParams reference_params() {
  const auto m = theoretical_moments(100e-6, 5e-6, 5e-6);
  return estimate_mme(m.m1, m.m2, m.m3);
}

EngineConfig config() {
  EngineConfig c;
  c.fs = kFs;
  c.batch_size = 1000;
  return c;
}

ArrivedFrame frame_at(std::int64_t second, int c, double shift_s) {
  const StreamTiming t(kFs);
  ArrivedFrame f;
  f.frame.sv_id = "MU01";
  f.frame.smp_cnt = static_cast<std::uint16_t>(c);
  f.arrival_ns = t.expected_ns(second, c) + std::llround(shift_s * 1e9);
  return f;
}

}  // namespace

TEST_SUITE("ips_engine") {

TEST_CASE("frame at the expected shift is accepted at arrival") {
  IpsEngine e(config(), reference_params());
  std::vector<ReleasedFrame> out;
  auto f = frame_at(10, 5, 106e-6);
  const auto t = f.arrival_ns;
  e.process(std::move(f), out);
  REQUIRE(out.size() == 1);
  CHECK(out[0].verdict.decision == Decision::Accepted);
  CHECK(out[0].verdict.decision_time_ns == t);
  CHECK(out[0].verdict.f_as_s == doctest::Approx(106e-6));
  CHECK(e.counters().accepted == 1);
}

TEST_CASE("early frame is held until its expiration") {
  IpsEngine e(config(), reference_params());
  auto f = frame_at(10, 5, 90e-6);
  const auto t = f.arrival_ns;
  CHECK_FALSE(e.ingest(std::move(f)).has_value());
  REQUIRE(e.staging().size() == 1);
  const auto exp = e.staging()[0].f_exp_ns;
  CHECK(exp >= t + 15'000);
  CHECK(e.release_due(exp).empty());
  const auto rel = e.release_due(exp + 1);
  REQUIRE(rel.size() == 1);
  CHECK(rel[0].verdict.decision_time_ns == exp + 1);
}

TEST_CASE("likelihood duel keeps the more probable frame") {
  SUBCASE("later frame wins") {
    IpsEngine e(config(), reference_params());
    CHECK_FALSE(e.ingest(frame_at(3, 7, 80e-6)));
    const auto v = e.ingest(frame_at(3, 7, 102e-6));
    REQUIRE(v);
    CHECK(v->decision == Decision::DiscardedOutscored);
    CHECK(v->f_as_s == doctest::Approx(80e-6));
    REQUIRE(e.staging().size() == 1);
    CHECK(e.staging()[0].f_as == doctest::Approx(102e-6));
  }
  SUBCASE("earlier frame wins") {
    IpsEngine e(config(), reference_params());
    CHECK_FALSE(e.ingest(frame_at(3, 7, 100e-6)));
    const auto v = e.ingest(frame_at(3, 7, 80e-6));
    REQUIRE(v);
    CHECK(v->decision == Decision::DiscardedOutscored);
    CHECK(v->f_as_s == doctest::Approx(80e-6));
  }
  SUBCASE("ties keep the frame already staged") {
    IpsEngine e(config(), reference_params());
    auto a = frame_at(3, 7, 95e-6);
    a.ingress_port = 1;
    CHECK_FALSE(e.ingest(a));
    const auto v = e.ingest(frame_at(3, 7, 95e-6));
    REQUIRE(v);
    CHECK(v->decision == Decision::DiscardedOutscored);
    CHECK(e.staging()[0].frame.ingress_port == 1);
  }
}

TEST_CASE("accepted counter is replay-protected within its second") {
  IpsEngine e(config(), reference_params());
  std::vector<ReleasedFrame> out;
  e.process(frame_at(4, 9, 105e-6), out);
  REQUIRE(out.size() == 1);
  const auto v = e.ingest(frame_at(4, 9, 104e-6));
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedReplay);
  CHECK(e.counters().replay == 1);
  // Same counter in the next second is a new slot.
  e.process(frame_at(5, 9, 105e-6), out);
  CHECK(out.size() == 2);
}

TEST_CASE("gates: flood beyond five sigma, latency beyond the budget") {
  IpsEngine e(config(), reference_params());
  auto v = e.ingest(frame_at(1, 1, 145e-6));
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedFlood);
  v = e.ingest(frame_at(1, 2, 65e-6));
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedFlood);
  v = e.ingest(frame_at(1, 3, 105e-6 + 3.5e-3));
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedLatency);
  CHECK_FALSE(e.ingest(frame_at(1, 4, 120e-6)));
  CHECK(e.counters().flood == 2);
  CHECK(e.counters().latency == 1);
}

TEST_CASE("malformed input") {
  IpsEngine e(config(), reference_params());
  auto v = e.ingest(frame_at(1, 0, 105e-6));
  ArrivedFrame bad = frame_at(1, 0, 105e-6);
  bad.frame.smp_cnt = kFs;
  v = e.ingest(bad);
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedMalformed);
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
  v = e.ingest_bytes(junk, 123);
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedMalformed);
  CHECK(v->smp_cnt == -1);
  CHECK(e.counters().malformed == 2);
}

TEST_CASE("warm-up accepts the prefix and fits its shifts") {
  EngineConfig cfg = config();
  cfg.warmup_frames = 480;
  IpsEngine e(cfg);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 5e-6);
  std::exponential_distribution<double> x(1.0 / 5e-6);
  std::vector<ReleasedFrame> out;
  int warm = 0;
  e.set_verdict_sink([&](const Verdict& v) { warm += v.warmup; });
  for (int i = 0; i < 480; ++i) e.process(frame_at(0, i, 100e-6 + g(rng) + x(rng)), out);
  CHECK_FALSE(e.warming_up());
  CHECK(warm == 480);
  CHECK(out.size() == 480);
  CHECK(e.params().expected_value() == doctest::Approx(105e-6).epsilon(0.03));
  // Counters of the warm-up second stay protected.
  const auto v = e.ingest(frame_at(0, 10, 105e-6));
  REQUIRE(v);
  CHECK(v->decision == Decision::DiscardedReplay);
  CHECK_THROWS_AS(warm_up(std::vector<FrameTime>(50), 50, StreamTiming(kFs)), std::invalid_argument);
}

TEST_CASE("warm-up unwraps shifts around the half-second boundary") {
  std::vector<FrameTime> ft;
  const StreamTiming t(kFs);
  for (int i = 0; i < 4800; ++i) ft.push_back({t.expected_ns(3, i) + 499'900'000 + (i % 7) * 50'000, i});
  const auto p = warm_up(std::span<const FrameTime>(ft), 4800, t);
  CHECK(std::abs(p.expected_value()) == doctest::Approx(0.50005).epsilon(1e-4));
  CHECK(p.full_std() < 2e-4);
}

TEST_CASE("re-estimation after k accepted shifts tracks a mean step") {
  EngineConfig cfg = config();
  cfg.batch_size = 100;
  IpsEngine e(cfg, reference_params());
  std::vector<ReleasedFrame> out;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 5e-6);
  std::exponential_distribution<double> x(1.0 / 5e-6);
  for (std::int64_t s = 0; s < 5; ++s)
    for (int c = 0; c < kFs; ++c) e.process(frame_at(s, c, 110e-6 + g(rng) + x(rng)), out);
  e.flush(out);
  CHECK(e.counters().reestimates == e.counters().accepted / 100);
  CHECK(e.params().expected_value() == doctest::Approx(115e-6).epsilon(0.02));
  CHECK(e.params_snapshot()->m1 == e.params().m1);
}

TEST_CASE("no two accepted frames share a slot under duplicates") {
  IpsEngine e(config(), reference_params());
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(105e-6, 6e-6);
  std::vector<ArrivedFrame> frames;
  for (std::int64_t s = 0; s < 2; ++s)
    for (int c = 0; c < kFs; ++c)
      for (int k = 0; k < 2; ++k) frames.push_back(frame_at(s, c, g(rng)));
  std::stable_sort(frames.begin(), frames.end(),
                   [](const ArrivedFrame& a, const ArrivedFrame& b) { return a.arrival_ns < b.arrival_ns; });
  std::vector<ReleasedFrame> out;
  for (auto& f : frames) e.process(std::move(f), out);
  e.flush(out);
  std::set<std::pair<std::int64_t, int>> seen;
  const StreamTiming t(kFs);
  for (const auto& r : out) {
    const auto s = arrival_shift(r.frame.arrival_ns, r.frame.frame.smp_cnt, t, 105e-6).second_index;
    CHECK(seen.insert({s, r.frame.frame.smp_cnt}).second);
  }
  const auto& k = e.counters();
  CHECK(k.ingested == k.accepted + k.flood + k.replay + k.outscored + k.latency + k.malformed);
  CHECK(k.accepted <= 2u * kFs);
  CHECK(k.accepted + k.flood >= 2u * kFs);
}

TEST_CASE("accepted slot bookkeeping") {
  AcceptedSlots s(kFs);
  CHECK_FALSE(s.seen(5, 1));
  s.insert(5, 1);
  CHECK(s.seen(5, 1));
  CHECK_FALSE(s.seen(5, 2));
  s.insert(6, 2);
  CHECK(s.seen(5, 1));
  s.insert(7, 3);
  CHECK(s.seen(5, 4000));  // older than the tracked window
  CHECK_FALSE(s.seen(6, 1));
  CHECK(s.seen(6, 2));
  s.clear();
  CHECK_FALSE(s.seen(7, 3));
}

TEST_CASE("accepted buffer is a ring of the last k shifts") {
  AcceptedBuffer b(3);
  for (int i = 1; i <= 5; ++i) b.push(i);
  CHECK(b.size() == 3);
  CHECK(b.pending() == 5);
  CHECK(b.contents() == std::vector<double>{3, 4, 5});
  b.mark_consumed();
  CHECK(b.pending() == 0);
}

TEST_CASE("verdict line format") {
  std::ostringstream os;
  write_verdict(os, Verdict{1, 17, Decision::DiscardedReplay, 1234567, 101.25e-6, 0.5, false});
  CHECK(os.str() == "{\"t\":1234567,\"smpCnt\":17,\"decision\":\"discarded_replay\",\"f_as_us\":101.250,\"f_p\":0.5}\n");
}

}

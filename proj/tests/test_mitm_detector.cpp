#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "svguard/mitm_detector.hpp"

using namespace svguard;

namespace {

std::vector<WindowStats> stream(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<WindowStats> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].index = static_cast<std::int64_t>(i);
    out[i].mean = 150e-6 + 2e-6 * g(rng);
    out[i].std = 8e-6 + 0.3e-6 * g(rng);
    out[i].skew = 0.6 + 0.05 * g(rng);
  }
  return out;
}

std::size_t alarms(const std::vector<double>& s, double theta) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) { return v > theta; }));
}

}  // namespace

TEST_SUITE("mitm_detector") {

TEST_CASE("threshold calibration meets the target FPR with the smallest threshold") {
  std::vector<double> s(1000);
  std::iota(s.begin(), s.end(), 1.0);
  std::shuffle(s.begin(), s.end(), std::mt19937_64(1));
  const double theta = calibrate_threshold(s, 0.0015);
  CHECK(theta == 999.0);
  CHECK(alarms(s, theta) == 1);
  CHECK(alarms(s, 998.0) > 1);
  CHECK(calibrate_threshold(s, 0.0) == 1000.0);
  CHECK(calibrate_threshold(s, 0.1) == 900.0);
  CHECK(alarms(s, 900.0) == 100);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> r(1 + rng() % 3000);
    for (auto& v : r) v = std::floor(u(rng) * 100) / 100;  // ties
    const double target = u(rng) * 0.2;
    if (*std::min_element(r.begin(), r.end()) == *std::max_element(r.begin(), r.end())) continue;
    const double t = calibrate_threshold(r, target);
    CHECK(static_cast<double>(alarms(r, t)) <= target * static_cast<double>(r.size()));
  }
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(s, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_threshold(std::vector<double>(5, 0.3), 0.01), std::domain_error);
}

TEST_CASE("rolling sequences") {
  const auto s = stream(40, 1);
  const auto seqs = rolling_sequences(s, 16, 4);
  REQUIRE(seqs.size() == 7);  // (40 - 16) / 4 + 1
  CHECK(seqs[2].front().index == 8);
  CHECK(seqs[2].back().index == 23);
  CHECK(rolling_sequences(s, 41, 1).empty());
  CHECK_THROWS_AS(rolling_sequences(s, 0, 1), std::invalid_argument);
}

TEST_CASE("perturbation applies exact deltas") {
  const auto s = stream(10, 2);
  const auto p = perturb(s, {50e-6, 0.1, -0.05});
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(p[i].mean - s[i].mean == doctest::Approx(50e-6).epsilon(1e-9));
    CHECK(p[i].std == doctest::Approx(s[i].std * 1.1));
    CHECK(p[i].skew == doctest::Approx(s[i].skew * 0.95));
  }
  const auto f = mitm_features(p);
  CHECK(f.steps == 10);
  CHECK(f.data[0] == doctest::Approx(p[0].mean * 1e6));
  CHECK(f.data[1] == doctest::Approx(p[0].std * 1e6));
  CHECK(f.data[2] == doctest::Approx(p[0].skew));
}

TEST_CASE("training set is balanced and within bounds") {
  const auto s = stream(400, 3);
  const auto seqs = rolling_sequences(s, 16, 4);
  const PerturbBounds b{300e-6, 0.1, 0.05};
  const auto ts = make_training_set(seqs, b, 7);
  REQUIRE(ts.size() == seqs.size());
  const auto pos = std::count_if(ts.begin(), ts.end(), [](const LabeledSequence& l) { return l.label == 1; });
  CHECK(std::abs(2 * pos - static_cast<long>(ts.size())) <= 1);
  for (const auto& l : ts) {
    CHECK(std::abs(l.delta.dm_s) <= b.dm_s);
    CHECK(std::abs(l.delta.ds) <= b.ds);
    CHECK(std::abs(l.delta.dg) <= b.dg);
    if (l.label == 0) CHECK(l.delta.dm_s == 0.0);
  }
  const auto again = make_training_set(seqs, b, 7);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(again[i].label == ts[i].label);
    CHECK(again[i].delta.dm_s == ts[i].delta.dm_s);
  }
}

TEST_CASE("a small detector learns a large mean shift and round-trips through a file") {
  const auto s = stream(2000, 4);
  const auto seqs = rolling_sequences(s, 8, 2);
  auto ts = make_training_set(seqs, {300e-6, 0.1, 0.05}, 5);
  // Keep every positive at least 100 us away so the task is separable.
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (ts[i].label == 1 && std::abs(ts[i].delta.dm_s) < 100e-6) {
      ts[i].delta.dm_s = ts[i].delta.dm_s < 0 ? -100e-6 : 100e-6;
      ts[i].windows = perturb(seqs[i], ts[i].delta);
    }
  MitmModel m = make_mitm_model(6, 1, 8);
  m.sequence_length = 8;
  rnn::TrainConfig cfg;
  cfg.epochs = 15;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.clip_norm = 5;
  cfg.seed = 9;
  train_mitm(m, ts, cfg);
  int correct = 0;
  for (const auto& l : ts) correct += (score(m, l.windows) > 0.5) == (l.label == 1);
  CHECK(static_cast<double>(correct) / static_cast<double>(ts.size()) > 0.9);

  m.threshold = 0.7;
  m.calibrated = true;
  const auto path = (std::filesystem::temp_directory_path() / "svguard_mitm_test.bin").string();
  save_mitm_model(path, m, 6);
  const auto back = load_mitm_model(path);
  std::filesystem::remove(path);
  CHECK(back.threshold == 0.7);
  CHECK(back.sequence_length == 8);
  CHECK(back.weights.params == m.weights.params);
  CHECK(score(back, seqs[3]) == score(m, seqs[3]));
}

TEST_CASE("scoring requires standardization constants") {
  const MitmModel m = make_mitm_model(1);
  CHECK_THROWS_AS(score(m, stream(16, 1)), std::invalid_argument);
  CHECK(mitm_spec().param_count() == rnn::RnnSpec{rnn::CellKind::Lstm, 4, 20, 3, 1, rnn::HeadKind::Sigmoid}.param_count());
}

TEST_CASE("alert line format") {
  std::ostringstream os;
  write_alert(os, 5000, 0.93, 0.91);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["t"] == 5000);
  CHECK(j["alarm"] == true);
  CHECK(j["score"].get<double>() == doctest::Approx(0.93));
  CHECK(j["theta"].get<double>() == doctest::Approx(0.91));
}

}

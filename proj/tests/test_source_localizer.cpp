#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <random>
#include <stdexcept>

#include "svguard/source_localizer.hpp"

using namespace svguard;

namespace {

WindowStats win(double m_us, double s_us, double g, std::int64_t index = 0, std::int64_t start = 0) {
  WindowStats w;
  w.mean = m_us * 1e-6;
  w.std = s_us * 1e-6;
  w.skew = g;
  w.index = index;
  w.start_ns = start;
  return w;
}

}  // namespace

TEST_SUITE("source_localizer") {

TEST_CASE("feature count") {
  CHECK(feature_count(2) == 3);
  CHECK(feature_count(5) == 30);
  CHECK(feature_count(10) == 135);
}

TEST_CASE("pair features are differences in lexicographic pair order") {
  const std::vector<WindowStats> a = {win(100, 5, 0.5), win(110, 6, 0.7), win(130, 9, 0.4)};
  const auto f = pair_features(a);
  // (0,1), (0,2), (1,2)
  const std::vector<double> expect = {-10, -1, -0.2, -30, -4, 0.1, -20, -3, 0.3};
  REQUIRE(f.values.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(f.values[i] == doctest::Approx(expect[i]));
}

TEST_CASE("identical windows at every point give zero features") {
  std::vector<WindowStats> a(10, win(150, 8, 0.6));
  const auto f = pair_features(a);
  CHECK(f.values.size() == 135);
  for (double v : f.values) CHECK(v == 0.0);
}

TEST_CASE("alignment by index stops at the shortest stream") {
  std::vector<std::vector<WindowStats>> pts(3);
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 10 - p; ++i) pts[p].push_back(win(100 + p, 5, 0.5, i));
  CHECK(build_features(pts).size() == 8);
  CHECK_THROWS_AS(build_features(std::vector<std::vector<WindowStats>>(1)), std::invalid_argument);
}

TEST_CASE("alignment by time drops lagging frames") {
  std::vector<std::vector<WindowStats>> pts(2);
  for (int i = 0; i < 10; ++i) pts[0].push_back(win(100, 5, 0.5, i, i * 10'000'000));
  for (int i = 0; i < 10; ++i)
    if (i != 4) pts[1].push_back(win(101, 5, 0.5, i, i * 10'000'000 + 200'000));
  AlignOptions opt;
  opt.max_lag_ns = 1'000'000;
  const auto f = build_features(pts, opt);
  CHECK(f.size() == 9);
  opt.max_lag_ns = 100'000;
  CHECK(build_features(pts, opt).empty());
}

TEST_CASE("reference split keeps train and test disjoint") {
  const auto s = ScenarioSplit::reference();
  s.validate();
  for (const auto& k : s.train) CHECK(s.test.count(k) == 0);
  CHECK(s.train.count({1, Part::Normal}));
  CHECK(s.train.count({4, Part::Normal}));
  CHECK(s.test.count({4, Part::Anomalous}));
  CHECK(s.test.count({2, Part::Normal}));
  ScenarioSplit leak = s;
  leak.test.insert({1, Part::Anomalous});
  CHECK_THROWS_AS(leak.validate(), std::invalid_argument);
}

TEST_CASE("feature sequences take the label of their last frame") {
  Acquisition acq;
  acq.compromised = 2;
  for (int i = 0; i < 20; ++i) {
    acq.frames.push_back(pair_features(std::vector<WindowStats>{win(i, 1, 0), win(0, 1, 0)}));
    acq.frame_labels.push_back(i >= 10 ? 2 : 0);
  }
  const auto seqs = feature_sequences(acq, 4, 2);
  REQUIRE(seqs.size() == 9);
  CHECK(seqs[3].label == 0);  // frames 6..9
  CHECK(seqs[4].label == 2);  // frames 8..11
  acq.frame_labels.pop_back();
  CHECK_THROWS_AS(feature_sequences(acq, 4, 2), std::invalid_argument);
}

TEST_CASE("a small localizer separates devices by pair means and round-trips") {
  // Device k shifts point k (of 3) by +40 us; class 0 leaves all equal.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LabeledFeatureSequence> data;
  for (int rep = 0; rep < 60; ++rep)
    for (int label = 0; label <= 3; ++label) {
      LabeledFeatureSequence s;
      s.label = label;
      for (int t = 0; t < 6; ++t) {
        std::vector<WindowStats> w;
        for (int p = 1; p <= 3; ++p) w.push_back(win(150 + 2 * g(rng) + (p == label ? 40 : 0), 8 + g(rng) * 0.3, 0.5));
        s.frames.push_back(pair_features(w));
      }
      data.push_back(std::move(s));
    }
  rnn::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.seed = 4;
  const auto res = train_localizer(data, 3, 3, cfg, 1, 12);
  const auto ev = evaluate_localizer(res.model, data);
  CHECK(ev.confusion.accuracy().value() > 0.95);
  CHECK(ev.confusion.total() == data.size());

  const auto path = (std::filesystem::temp_directory_path() / "svguard_loc_test.bin").string();
  save_localizer(path, res.model, 4);
  const auto back = load_localizer(path);
  std::filesystem::remove(path);
  CHECK(back.points == 3);
  CHECK(back.devices == 3);
  CHECK(back.sequence_length == 6);
  CHECK(localize(back, data[5].frames) == localize(res.model, data[5].frames));
  const auto p = localize(back, data[5].frames);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));

  std::vector<FeatureFrame> wrong(6);
  for (auto& f : wrong) f.values.assign(feature_count(4), 0.0);
  CHECK_THROWS_AS(localize(back, wrong), std::invalid_argument);
}

TEST_CASE("adjacent share counts device-to-device mistakes only") {
  // Hand-built model whose head always predicts class 2 of 5 devices.
  LocalizerModel m;
  m.points = 2;
  m.devices = 5;
  m.weights = rnn::zero_weights(localizer_spec(2, 5, 1, 2));
  m.weights.params[layout(m.weights.spec).head_b + 2] = 10.0;
  m.standardizer.mean.assign(3, 0.0);
  m.standardizer.scale.assign(3, 1.0);
  std::vector<LabeledFeatureSequence> data(4);
  const int labels[] = {0, 1, 2, 5};
  for (int i = 0; i < 4; ++i) {
    data[i].label = labels[i];
    data[i].frames.assign(3, FeatureFrame{0, 0, {0, 0, 0}});
  }
  const auto ev = evaluate_localizer(m, data);
  CHECK(ev.normal_fpr.value() == 1.0);
  CHECK(ev.adjacent_share.value() == doctest::Approx(0.5));  // 1 -> 2 adjacent, 5 -> 2 not
  CHECK(ev.errors == 3);
}

}

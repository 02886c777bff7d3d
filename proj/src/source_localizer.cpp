#include "svguard/source_localizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svguard/rnn_io.hpp"

namespace svguard {

FeatureFrame pair_features(std::span<const WindowStats> aligned) {
  FeatureFrame f;
  const std::size_t n = aligned.size();
  f.values.reserve(feature_count(static_cast<int>(n)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      f.values.push_back((aligned[i].mean - aligned[j].mean) * 1e6);
      f.values.push_back((aligned[i].std - aligned[j].std) * 1e6);
      f.values.push_back(aligned[i].skew - aligned[j].skew);
    }
  if (n > 0) {
    f.index = aligned[0].index;
    f.start_ns = aligned[0].start_ns;
  }
  return f;
}

std::vector<FeatureFrame> build_features(std::span<const std::vector<WindowStats>> per_point, const AlignOptions& opt) {
  if (per_point.size() < 2) throw std::invalid_argument("localization needs at least two observation points");
  std::vector<FeatureFrame> out;
  const auto& ref = per_point[0];
  std::vector<std::size_t> cursor(per_point.size(), 0);
  std::vector<WindowStats> aligned(per_point.size());

  for (std::size_t r = 0; r < ref.size(); ++r) {
    aligned[0] = ref[r];
    bool ok = true;
    for (std::size_t p = 1; p < per_point.size() && ok; ++p) {
      const auto& s = per_point[p];
      if (opt.max_lag_ns <= 0) {
        if (r >= s.size()) {
          ok = false;
          break;
        }
        aligned[p] = s[r];
        continue;
      }
      // Nearest start time; cursors only move forward.
      auto& c = cursor[p];
      while (c + 1 < s.size() &&
             std::llabs(s[c + 1].start_ns - ref[r].start_ns) <= std::llabs(s[c].start_ns - ref[r].start_ns))
        ++c;
      if (c >= s.size() || std::llabs(s[c].start_ns - ref[r].start_ns) > opt.max_lag_ns) {
        ok = false;
        break;
      }
      aligned[p] = s[c];
    }
    if (ok) out.push_back(pair_features(aligned));
  }
  return out;
}

rnn::RnnSpec localizer_spec(int points, int devices, int layers, int hidden) {
  rnn::RnnSpec s;
  s.cell = rnn::CellKind::Elman;
  s.num_layers = layers;
  s.hidden_size = hidden;
  s.input_size = static_cast<int>(feature_count(points));
  s.n_out = devices + 1;
  s.head = rnn::HeadKind::Softmax;
  return s;
}

namespace {

rnn::Sequence to_sequence(std::span<const FeatureFrame> seq, std::size_t width) {
  rnn::Sequence x;
  x.steps = static_cast<int>(seq.size());
  x.data.reserve(seq.size() * width);
  for (const auto& f : seq) {
    if (f.values.size() != width) throw std::invalid_argument("feature frame width does not match the model");
    x.data.insert(x.data.end(), f.values.begin(), f.values.end());
  }
  return x;
}

}  // namespace

std::vector<double> localize(const LocalizerModel& model, std::span<const FeatureFrame> seq) {
  if (seq.empty()) throw std::invalid_argument("empty feature sequence");
  auto x = to_sequence(seq, feature_count(model.points));
  if (!model.standardizer.empty()) model.standardizer.apply(x);
  return rnn::forward(model.weights, x);
}

int predicted_class(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ScenarioSplit ScenarioSplit::reference() {
  ScenarioSplit s;
  s.train = {{1, Part::Normal}, {1, Part::Anomalous}, {3, Part::Normal}, {3, Part::Anomalous}, {4, Part::Normal}};
  s.test = {{2, Part::Normal}, {2, Part::Anomalous}, {4, Part::Anomalous}};
  return s;
}

void ScenarioSplit::validate() const {
  for (const auto& k : train)
    if (test.count(k))
      throw std::invalid_argument("scenario " + std::to_string(k.first) +
                                  (k.second == Part::Normal ? " normal" : " anomalous") +
                                  " is in both the training and the testing split");
}

std::vector<LabeledFeatureSequence> feature_sequences(const Acquisition& acq, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) throw std::invalid_argument("sequence length and stride must be positive");
  if (acq.frame_labels.size() != acq.frames.size()) throw std::invalid_argument("one label per frame expected");
  std::vector<LabeledFeatureSequence> out;
  for (std::size_t i = 0; i + length <= acq.frames.size(); i += stride) {
    LabeledFeatureSequence s;
    s.frames.assign(acq.frames.begin() + static_cast<std::ptrdiff_t>(i),
                    acq.frames.begin() + static_cast<std::ptrdiff_t>(i + length));
    s.label = acq.frame_labels[i + length - 1];
    out.push_back(std::move(s));
  }
  return out;
}

LocalizerEval evaluate_localizer(const LocalizerModel& model, std::span<const LabeledFeatureSequence> data) {
  LocalizerEval ev(model.devices + 1);
  std::uint64_t normal = 0, normal_alarm = 0, mis = 0, adjacent = 0;
  for (const auto& s : data) {
    const int pred = predicted_class(localize(model, s.frames));
    ev.confusion.add(s.label, pred);
    if (s.label == 0) {
      ++normal;
      if (pred != 0) ++normal_alarm;
    } else if (pred != s.label && pred != 0) {
      ++mis;
      if (std::abs(pred - s.label) <= 1) ++adjacent;
    }
    if (pred != s.label) ++ev.errors;
  }
  if (normal) ev.normal_fpr = static_cast<double>(normal_alarm) / static_cast<double>(normal);
  if (mis) ev.adjacent_share = static_cast<double>(adjacent) / static_cast<double>(mis);
  return ev;
}

LocalizerTrainResult train_localizer(std::span<const LabeledFeatureSequence> train, int points, int devices,
                                     const rnn::TrainConfig& cfg, int layers, int hidden) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  const std::size_t width = feature_count(points);
  std::vector<rnn::Sample> samples;
  samples.reserve(train.size());
  for (const auto& s : train) samples.push_back({to_sequence(s.frames, width), static_cast<double>(s.label)});

  LocalizerTrainResult res;
  res.model.points = points;
  res.model.devices = devices;
  res.model.sequence_length = static_cast<int>(train.front().frames.size());
  res.model.standardizer = rnn::Standardizer::fit(samples, static_cast<int>(width));
  res.model.standardizer.apply(samples);
  res.history = rnn::train(localizer_spec(points, devices, layers, hidden), samples, cfg);
  res.model.weights = res.history.weights;
  return res;
}

void save_localizer(const std::string& path, const LocalizerModel& m, std::uint64_t seed) {
  rnn::SavedModel sm;
  sm.weights = m.weights;
  sm.seed = seed;
  sm.extra = {{"standardizer", rnn::standardizer_to_json(m.standardizer)},
              {"points", m.points},
              {"devices", m.devices},
              {"sequence_length", m.sequence_length}};
  rnn::save_model_file(path, sm);
}

LocalizerModel load_localizer(const std::string& path) {
  const auto sm = rnn::load_model_file(path);
  LocalizerModel m;
  m.weights = sm.weights;
  m.standardizer = rnn::standardizer_from_json(sm.extra.at("standardizer"));
  m.points = sm.extra.at("points").get<int>();
  m.devices = sm.extra.at("devices").get<int>();
  m.sequence_length = sm.extra.value("sequence_length", 16);
  if (m.weights.spec.input_size != static_cast<int>(feature_count(m.points)))
    throw std::runtime_error("localizer input width does not match its point count");
  return m;
}

}  // namespace svguard

#include "svguard/mitm_detector.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "svguard/rnn_io.hpp"

namespace svguard {

rnn::RnnSpec mitm_spec(int layers, int hidden) {
  rnn::RnnSpec s;
  s.cell = rnn::CellKind::Lstm;
  s.num_layers = layers;
  s.hidden_size = hidden;
  s.input_size = 3;
  s.n_out = 1;
  s.head = rnn::HeadKind::Sigmoid;
  return s;
}

MitmModel make_mitm_model(std::uint64_t seed, int layers, int hidden) {
  MitmModel m;
  m.weights = rnn::init_weights(mitm_spec(layers, hidden), seed);
  return m;
}

rnn::Sequence mitm_features(std::span<const WindowStats> seq) {
  rnn::Sequence x;
  x.steps = static_cast<int>(seq.size());
  x.data.reserve(seq.size() * 3);
  for (const auto& w : seq) {
    x.data.push_back(w.mean * 1e6);
    x.data.push_back(w.std * 1e6);
    x.data.push_back(w.skew);
  }
  return x;
}

double score(const MitmModel& model, std::span<const WindowStats> seq) {
  if (seq.empty()) throw std::invalid_argument("empty window sequence");
  if (model.standardizer.empty()) throw std::invalid_argument("model has no standardization constants");
  rnn::Sequence x = mitm_features(seq);
  model.standardizer.apply(x);
  return rnn::forward(model.weights, x)[0];
}

double calibrate_threshold(std::span<const double> normal_scores, double target_fpr) {
  if (normal_scores.empty()) throw std::invalid_argument("no normal scores to calibrate on");
  if (!(target_fpr >= 0.0 && target_fpr < 1.0)) throw std::invalid_argument("target FPR must be in [0, 1)");
  std::vector<double> s(normal_scores.begin(), normal_scores.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  if (s.front() == s.back()) throw std::domain_error("all normal scores are equal; no threshold separates them");
  const auto allowed = static_cast<std::size_t>(target_fpr * static_cast<double>(s.size()));
  // Alarms are score > theta, so theta at the (allowed+1)-th largest score
  // leaves at most `allowed` alarms.
  return s[std::min(allowed, s.size() - 1)];
}

std::vector<std::vector<WindowStats>> rolling_sequences(std::span<const WindowStats> stream, std::size_t length,
                                                        std::size_t stride) {
  if (length == 0 || stride == 0) throw std::invalid_argument("sequence length and stride must be positive");
  std::vector<std::vector<WindowStats>> out;
  for (std::size_t i = 0; i + length <= stream.size(); i += stride)
    out.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(i),
                     stream.begin() + static_cast<std::ptrdiff_t>(i + length));
  return out;
}

std::vector<WindowStats> perturb(std::span<const WindowStats> seq, const sim::MitmDelta& d) {
  std::vector<WindowStats> out(seq.begin(), seq.end());
  for (auto& w : out) {
    w.mean += d.dm_s;
    w.std *= 1.0 + d.ds;
    w.skew *= 1.0 + d.dg;
  }
  return out;
}

std::vector<LabeledSequence> make_training_set(std::span<const std::vector<WindowStats>> normal,
                                               const PerturbBounds& bounds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(normal.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> flip(normal.size(), 0);
  for (std::size_t k = 0; k < order.size(); k += 2) flip[order[k]] = 1;

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<LabeledSequence> out;
  out.reserve(normal.size());
  for (std::size_t i = 0; i < normal.size(); ++i) {
    LabeledSequence s;
    if (flip[i]) {
      s.delta = {bounds.dm_s * u(rng), bounds.ds * u(rng), bounds.dg * u(rng)};
      s.windows = perturb(normal[i], s.delta);
      s.label = 1;
    } else {
      s.windows = normal[i];
    }
    out.push_back(std::move(s));
  }
  return out;
}

rnn::TrainResult train_mitm(MitmModel& model, std::span<const LabeledSequence> data, const rnn::TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  std::vector<rnn::Sample> samples;
  samples.reserve(data.size());
  for (const auto& s : data) samples.push_back({mitm_features(s.windows), static_cast<double>(s.label)});
  model.standardizer = rnn::Standardizer::fit(samples, 3);
  model.standardizer.apply(samples);
  auto res = rnn::train(model.weights.spec, samples, cfg);
  model.weights = res.weights;
  model.calibrated = false;
  return res;
}

void write_alert(std::ostream& out, std::int64_t t_ns, double s, double theta) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "{\"t\":%" PRId64 ",\"score\":%.9g,\"theta\":%.9g,\"alarm\":%s}\n", t_ns, s, theta,
                s > theta ? "true" : "false");
  out << buf;
}

void save_mitm_model(const std::string& path, const MitmModel& m, std::uint64_t seed) {
  rnn::SavedModel sm;
  sm.weights = m.weights;
  sm.seed = seed;
  sm.extra = {{"standardizer", rnn::standardizer_to_json(m.standardizer)},
              {"threshold", m.threshold},
              {"calibrated", m.calibrated},
              {"sequence_length", m.sequence_length}};
  rnn::save_model_file(path, sm);
}

MitmModel load_mitm_model(const std::string& path) {
  const auto sm = rnn::load_model_file(path);
  MitmModel m;
  m.weights = sm.weights;
  m.standardizer = rnn::standardizer_from_json(sm.extra.at("standardizer"));
  m.threshold = sm.extra.value("threshold", 0.5);
  m.calibrated = sm.extra.value("calibrated", false);
  m.sequence_length = sm.extra.value("sequence_length", 16);
  return m;
}

}  // namespace svguard

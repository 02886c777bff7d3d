#pragma once

// Attack-source localization over a ring of observation points. Every frame
// holds, for each pair i < j of points, the differences of their window mean,
// std and skewness; a stacked Elman network with a softmax head classifies
// sequences of frames into normal (class 0) or compromised device k (class k).

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svguard/metrics.hpp"
#include "svguard/rnn_core.hpp"
#include "svguard/stats_window.hpp"

namespace svguard {

struct FeatureFrame {
  std::int64_t index = 0;
  std::int64_t start_ns = 0;
  // For i < j in lexicographic order: m_i - m_j [us], s_i - s_j [us], g_i - g_j.
  std::vector<double> values;
};

inline std::size_t feature_count(int points) {
  return 3 * static_cast<std::size_t>(points) * static_cast<std::size_t>(points - 1) / 2;
}

/// Difference channels of one aligned set of windows, one per point.
FeatureFrame pair_features(std::span<const WindowStats> aligned);

struct AlignOptions {
  // Windows whose start differs from the reference by more than this are
  // treated as lagging and the frame is dropped. 0 aligns by window index
  // instead of time.
  std::int64_t max_lag_ns = 0;
};

/// Aligns the per-point window streams on point 0's windows and builds one
/// FeatureFrame per aligned set. Throws std::invalid_argument when fewer than
/// two streams are given.
std::vector<FeatureFrame> build_features(std::span<const std::vector<WindowStats>> per_point,
                                         const AlignOptions& opt = {});

struct LocalizerModel {
  rnn::RnnWeights weights;
  rnn::Standardizer standardizer;
  int points = 0;   // observation points feeding the features
  int devices = 0;  // classes - 1
  int sequence_length = 16;
};

/// Elman, 5 layers of 26, softmax over devices + 1 classes.
rnn::RnnSpec localizer_spec(int points, int devices, int layers = 5, int hidden = 26);

/// Class probabilities; throws std::invalid_argument when the frames do not
/// match the model's point count or the sequence is empty.
std::vector<double> localize(const LocalizerModel& model, std::span<const FeatureFrame> seq);
int predicted_class(std::span<const double> probs);

/// Identifies one acquisition: a scenario and whether it is the normal case
/// (compromised == 0) or an attack on device `compromised`.
struct Acquisition {
  int scenario = 0;
  int compromised = 0;
  std::vector<FeatureFrame> frames;
  std::vector<int> frame_labels;  // class per frame
};

enum class Part { Normal, Anomalous };
using SplitKey = std::pair<int, Part>;  // (scenario, part)

struct ScenarioSplit {
  std::set<SplitKey> train, test;

  /// train = {1 all, 3 all, 4 normal}, test = {2 all, 4 anomalous}.
  static ScenarioSplit reference();
  /// Throws std::invalid_argument when a (scenario, part) is in both sets.
  void validate() const;
};

struct LabeledFeatureSequence {
  std::vector<FeatureFrame> frames;
  int label = 0;  // label of the last frame
};

/// Rolling sequences over one acquisition.
std::vector<LabeledFeatureSequence> feature_sequences(const Acquisition& acq, std::size_t length, std::size_t stride);

struct LocalizerEval {
  ConfusionMatrix confusion;
  std::optional<double> normal_fpr;   // normal sequences not predicted 0
  std::optional<double> adjacent_share;  // attack mislocalizations within +-1 device
  std::size_t errors = 0;
  explicit LocalizerEval(int classes) : confusion(classes) {}
};

/// Scores `data`; adjacency uses ring positions 1..devices.
LocalizerEval evaluate_localizer(const LocalizerModel& model, std::span<const LabeledFeatureSequence> data);

struct LocalizerTrainResult {
  LocalizerModel model;
  rnn::TrainResult history;
};

/// Fits the standardizer on the training sequences and trains the network.
LocalizerTrainResult train_localizer(std::span<const LabeledFeatureSequence> train, int points, int devices,
                                     const rnn::TrainConfig& cfg, int layers = 5, int hidden = 26);

void save_localizer(const std::string& path, const LocalizerModel& m, std::uint64_t seed);
LocalizerModel load_localizer(const std::string& path);

}  // namespace svguard

#pragma once

// MitM detection: a stacked LSTM scores rolling sequences of window
// statistics (mean, std, skewness of accepted shifts) and alarms above a
// threshold calibrated on normal traffic.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "svguard/netsim.hpp"
#include "svguard/rnn_core.hpp"
#include "svguard/stats_window.hpp"

namespace svguard {

struct MitmModel {
  rnn::RnnWeights weights;
  rnn::Standardizer standardizer;
  double threshold = 0.5;
  bool calibrated = false;
  int sequence_length = 16;
};

/// LSTM, 4 layers of 20, 3 inputs, sigmoid head.
rnn::RnnSpec mitm_spec(int layers = 4, int hidden = 20);
MitmModel make_mitm_model(std::uint64_t seed, int layers = 4, int hidden = 20);

/// (m [us], s [us], g1) per window.
rnn::Sequence mitm_features(std::span<const WindowStats> seq);

/// Likelihood of an ongoing MitM. Throws std::invalid_argument for an empty
/// sequence or a model without standardization constants.
double score(const MitmModel& model, std::span<const WindowStats> seq);

/// Smallest threshold whose empirical FPR on `normal_scores` is at most
/// `target_fpr`, with alarm meaning score > threshold. Throws
/// std::invalid_argument on an empty set or target outside [0, 1), and
/// std::domain_error when every score is equal.
double calibrate_threshold(std::span<const double> normal_scores, double target_fpr);

/// Consecutive runs of `length` windows starting every `stride` windows.
std::vector<std::vector<WindowStats>> rolling_sequences(std::span<const WindowStats> stream, std::size_t length,
                                                        std::size_t stride = 1);

struct PerturbBounds {
  double dm_s = 300e-6;
  double ds = 0.10;
  double dg = 0.05;
};

/// m + dm, s (1 + ds), g1 (1 + dg) on every window.
std::vector<WindowStats> perturb(std::span<const WindowStats> seq, const sim::MitmDelta& d);

struct LabeledSequence {
  std::vector<WindowStats> windows;
  int label = 0;  // 1: perturbed
  sim::MitmDelta delta;
};

/// Every other sequence (in a seeded random order) is perturbed with deltas
/// drawn uniformly within +-bounds; the rest are kept as normal.
std::vector<LabeledSequence> make_training_set(std::span<const std::vector<WindowStats>> normal,
                                               const PerturbBounds& bounds, std::uint64_t seed);

/// Fits the standardizer on `data` and trains the network.
rnn::TrainResult train_mitm(MitmModel& model, std::span<const LabeledSequence> data, const rnn::TrainConfig& cfg);

/// {"t":<ns>,"score":<float>,"theta":<float>,"alarm":<bool>}
void write_alert(std::ostream& out, std::int64_t t_ns, double score, double theta);

void save_mitm_model(const std::string& path, const MitmModel& m, std::uint64_t seed);
MitmModel load_mitm_model(const std::string& path);

}  // namespace svguard

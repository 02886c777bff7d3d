#pragma once

// Stacked LSTM / Elman networks with a dense head on the last timestep,
// trained by backpropagation through time.
//
// Parameters live in one flat vector. Per layer l, with input width d
// (input_size for l = 0, hidden_size above) and G = 4 for LSTM, 1 for Elman:
//   W  [G*H x d]  row-major, input weights
//   U  [G*H x H]  row-major, recurrent weights
//   b  [G*H]
// followed by the head Wo [n_out x H] and bo [n_out]. LSTM gate blocks are
// stacked in the order i, f, g, o; the forget-gate bias is initialised to 1.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svguard::rnn {

enum class CellKind { Lstm, Elman };
enum class HeadKind { Sigmoid, Softmax };

const char* to_string(CellKind k);
const char* to_string(HeadKind k);

struct RnnSpec {
  CellKind cell = CellKind::Lstm;
  int num_layers = 1;
  int hidden_size = 8;
  int input_size = 1;
  int n_out = 1;
  HeadKind head = HeadKind::Sigmoid;

  /// Throws std::invalid_argument when a size is not positive or a sigmoid
  /// head has n_out != 1.
  void validate() const;
  int gates() const { return cell == CellKind::Lstm ? 4 : 1; }
  std::size_t param_count() const;
};

struct LayerView {
  std::size_t w = 0, u = 0, b = 0;  // offsets into the flat vector
  int in = 0;                       // input width
};

/// Offsets of each parameter block.
struct Layout {
  std::vector<LayerView> layers;
  std::size_t head_w = 0, head_b = 0, total = 0;
};
Layout layout(const RnnSpec& spec);

struct RnnWeights {
  RnnSpec spec;
  std::vector<double> params;
};

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in is the block's input
/// width (d for W, H for U and the head). Biases start at 0 except the LSTM
/// forget gate.
RnnWeights init_weights(const RnnSpec& spec, std::uint64_t seed);
RnnWeights zero_weights(const RnnSpec& spec);

/// T x input_size, row-major.
struct Sequence {
  std::vector<double> data;
  int steps = 0;
};

struct Sample {
  Sequence x;
  // Sigmoid head: probability target in [0,1]. Softmax head: class index.
  double target = 0.0;
};

/// Activations kept for the backward pass.
struct Cache {
  int steps = 0;
  // Per layer, (steps + 1) x H; row 0 is the zero initial state.
  std::vector<std::vector<double>> h, c;
  // Per layer, steps x G*H post-activation gate values (LSTM only).
  std::vector<std::vector<double>> gates;
  std::vector<double> out;
};

/// Network output: probability (sigmoid) or class probabilities (softmax).
/// Throws std::invalid_argument on an empty sequence or width mismatch.
std::vector<double> forward(const RnnWeights& w, const Sequence& x);
std::vector<double> forward(const RnnWeights& w, const Sequence& x, Cache& cache);

/// Loss of one sample given its forward output.
double loss(const RnnSpec& spec, std::span<const double> out, double target);

/// Adds d(loss)/d(params) for one sample into `grad` and returns the loss.
/// `cache` must come from forward() on the same weights and sequence.
double backward(const RnnWeights& w, const Sequence& x, const Cache& cache, double target,
                std::span<double> grad);

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares backward() with central differences of loss() at step `eps` for
/// every parameter. Relative error is |a - n| / max(|a|, |n|, floor), so
/// gradients below `floor` are judged on absolute error.
GradientCheck gradient_check(const RnnWeights& w, const Sequence& x, double target, double eps = 1e-5,
                             double floor = 1e-6);

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int patience = 10;                // epochs without validation improvement
  double validation_fraction = 0.2; // tail of the shuffled dataset
  Optimizer optimizer = Optimizer::Sgd;
  double momentum = 0.0;            // SGD only
  double clip_norm = 0.0;           // 0 disables global-norm clipping
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  RnnWeights weights;  // best validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Mini-batch training. Deterministic for a given seed. When the validation
/// split would be empty all samples are used for both. Throws
/// std::invalid_argument on an empty dataset or invalid targets and
/// TrainingDiverged on a non-finite loss.
TrainResult train(const RnnSpec& spec, std::span<const Sample> data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Fraction of samples whose thresholded (0.5) or argmax output matches.
double accuracy(const RnnWeights& w, std::span<const Sample> data);

/// Per-feature z-score constants, frozen from a training set.
struct Standardizer {
  std::vector<double> mean, scale;

  bool empty() const { return mean.empty(); }
  /// Features with zero spread get scale 1.
  static Standardizer fit(std::span<const Sample> data, int input_size);
  /// Throws std::invalid_argument on width mismatch or missing constants.
  void apply(Sequence& x) const;
  void apply(std::vector<Sample>& data) const;
};

}  // namespace svguard::rnn

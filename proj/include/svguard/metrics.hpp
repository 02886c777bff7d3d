#pragma once

// Binary and multiclass classification metrics, and the engine throughput
// benchmark. "Positive" means a malicious frame; discarding is the positive
// action.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "svguard/capture_io.hpp"
#include "svguard/ips_engine.hpp"

namespace svguard {

struct BinaryCounts {
  std::uint64_t tp = 0;  // malicious, discarded
  std::uint64_t fp = 0;  // legitimate, discarded
  std::uint64_t tn = 0;  // legitimate, accepted
  std::uint64_t fn = 0;  // malicious, accepted

  std::uint64_t total() const { return tp + fp + tn + fn; }
  /// Throws std::invalid_argument for Label::Unknown.
  void add(Label truth, bool discarded);
};

struct BinaryMetrics {
  BinaryCounts counts;
  // nullopt when the denominator is empty.
  std::optional<double> tpr, fpr, precision, f1;
};

BinaryMetrics binary_metrics(const BinaryCounts& c);
nlohmann::json to_json(const BinaryMetrics& m);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  void add(int truth, int predicted);
  int classes() const { return k_; }
  std::uint64_t at(int truth, int predicted) const;
  std::uint64_t total() const;

  std::optional<double> accuracy() const;
  std::optional<double> precision(int c) const;
  std::optional<double> recall(int c) const;
  std::optional<double> f1(int c) const;
  /// Unweighted mean over classes with a defined value.
  std::optional<double> macro_precision() const;
  std::optional<double> macro_recall() const;
  std::optional<double> macro_f1() const;

  /// Header "truth\\pred,0,1,...", one row per true class.
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;

 private:
  int k_;
  std::vector<std::uint64_t> cells_;
};

struct WireFrame {
  std::span<const std::uint8_t> bytes;
  std::int64_t arrival_ns = 0;
};

struct BenchResult {
  std::size_t frames = 0;
  double seconds = 0.0;
  double throughput_fps = 0.0;
  double p50_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
};

/// Times decode + gate + staging + release + re-estimation per frame. Only
/// the per-frame pipeline is inside the timed region.
BenchResult bench_throughput(IpsEngine& engine, std::span<const WireFrame> trace);

/// CPU model, logical cores, compiler and active SIMD backend.
nlohmann::json machine_info();

}  // namespace svguard

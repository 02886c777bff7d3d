#pragma once

// Sliding-window mean, standard deviation and skewness over accepted-frame
// arrival shifts. Moments are population moments (normalized by n), the same
// convention the EMG estimator uses.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svguard {

struct WindowStats {
  std::int64_t index = 0;     // window number within its source
  std::int64_t start_ns = 0;  // arrival of the first sample in the window
  int source = 0;             // observation point id
  double mean = 0.0;          // seconds
  double std = 0.0;           // seconds
  double skew = 0.0;          // g1 = m3 / m2^1.5
  bool degenerate = false;    // zero spread; skew forced to 0
};

/// Statistics of one window. Windows with no spread beyond rounding report
/// std = 0, skew = 0 and degenerate = true.
WindowStats window_stats(std::span<const double> samples);

/// Streaming windower: window j covers samples [j*step, j*step + width).
class SlidingWindows {
 public:
  /// Throws std::invalid_argument unless 0 < step <= width.
  SlidingWindows(std::size_t width, std::size_t step, int source = 0);

  /// Adds one sample; returns the window it completes, if any.
  std::optional<WindowStats> push(double shift_s, std::int64_t arrival_ns = 0);

  std::size_t width() const { return width_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t width_;
  std::size_t step_;
  int source_;
  std::vector<double> buf_;
  std::vector<std::int64_t> times_;
  std::size_t seen_ = 0;
  std::int64_t next_index_ = 0;
};

/// All complete windows of `shifts`. `arrivals`, when given, must match
/// `shifts` in length and supplies start_ns.
std::vector<WindowStats> windows(std::span<const double> shifts, std::size_t width = 200, std::size_t step = 50,
                                 int source = 0, std::span<const std::int64_t> arrivals = {});

/// CSV with header t,source,m_us,s_us,g1. Times are not part of the record.
void write_stats_csv(std::ostream& out, std::span<const WindowStats> stats, bool header = true);
/// Parses the CSV written above; throws std::runtime_error with the line
/// number on malformed input.
std::vector<WindowStats> read_stats_csv(std::istream& in);

}  // namespace svguard

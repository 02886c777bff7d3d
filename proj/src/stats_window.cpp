#include "svguard/stats_window.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "svguard/simd/kernels.hpp"

namespace svguard {

WindowStats window_stats(std::span<const double> samples) {
  WindowStats w;
  if (samples.empty()) {
    w.degenerate = true;
    return w;
  }
  const double n = static_cast<double>(samples.size());
  w.mean = simd::sum(samples.data(), samples.size()) / n;
  const auto sums = simd::central_sums(samples.data(), samples.size(), w.mean);
  const double m2 = sums.s2 / n;
  const double m3 = sums.s3 / n;
  w.std = std::sqrt(m2);
  // Constant input still leaves rounding residue of order eps * |mean|.
  if (!(w.std > 1e-13 * std::abs(w.mean)) || w.std == 0.0) {
    w.std = 0.0;
    w.skew = 0.0;
    w.degenerate = true;
    return w;
  }
  w.skew = m3 / (m2 * w.std);
  return w;
}

SlidingWindows::SlidingWindows(std::size_t width, std::size_t step, int source)
    : width_(width), step_(step), source_(source) {
  if (width == 0 || step == 0 || step > width)
    throw std::invalid_argument("sliding window needs 0 < step <= width");
  buf_.reserve(width);
  times_.reserve(width);
}

std::optional<WindowStats> SlidingWindows::push(double shift_s, std::int64_t arrival_ns) {
  buf_.push_back(shift_s);
  times_.push_back(arrival_ns);
  ++seen_;
  if (buf_.size() < width_) return std::nullopt;

  WindowStats w = window_stats(buf_);
  w.index = next_index_++;
  w.start_ns = times_.front();
  w.source = source_;
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(step_));
  times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(step_));
  return w;
}

std::vector<WindowStats> windows(std::span<const double> shifts, std::size_t width, std::size_t step, int source,
                                 std::span<const std::int64_t> arrivals) {
  if (width == 0 || step == 0 || step > width)
    throw std::invalid_argument("sliding window needs 0 < step <= width");
  if (!arrivals.empty() && arrivals.size() != shifts.size())
    throw std::invalid_argument("arrival and shift counts differ");
  std::vector<WindowStats> out;
  if (shifts.size() < width) return out;
  out.reserve((shifts.size() - width) / step + 1);
  for (std::size_t start = 0; start + width <= shifts.size(); start += step) {
    WindowStats w = window_stats(shifts.subspan(start, width));
    w.index = static_cast<std::int64_t>(out.size());
    w.source = source;
    w.start_ns = arrivals.empty() ? 0 : arrivals[start];
    out.push_back(w);
  }
  return out;
}

void write_stats_csv(std::ostream& out, std::span<const WindowStats> stats, bool header) {
  if (header) out << "t,source,m_us,s_us,g1\n";
  char line[160];
  for (const auto& w : stats) {
    std::snprintf(line, sizeof line, "%lld,%d,%.17g,%.17g,%.17g\n", static_cast<long long>(w.index), w.source,
                  w.mean * 1e6, w.std * 1e6, w.skew);
    out << line;
  }
}

std::vector<WindowStats> read_stats_csv(std::istream& in) {
  std::vector<WindowStats> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("t,", 0) == 0) continue;
    WindowStats w;
    long long t = 0;
    double m = 0, s = 0, g = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lld,%d,%lf,%lf,%lf%c", &t, &w.source, &m, &s, &g, &tail) != 5)
      throw std::runtime_error("stats csv line " + std::to_string(lineno) + ": expected t,source,m_us,s_us,g1");
    w.index = t;
    w.mean = m * 1e-6;
    w.std = s * 1e-6;
    w.skew = g;
    w.degenerate = s == 0.0;
    out.push_back(w);
  }
  return out;
}

}  // namespace svguard

#include "svguard/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "svguard/simd/kernels.hpp"

namespace svguard {

void BinaryCounts::add(Label truth, bool discarded) {
  switch (truth) {
    case Label::Malicious: ++(discarded ? tp : fn); return;
    case Label::Legitimate: ++(discarded ? fp : tn); return;
    case Label::Unknown: break;
  }
  throw std::invalid_argument("verdict without ground-truth label");
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

BinaryMetrics binary_metrics(const BinaryCounts& c) {
  BinaryMetrics m;
  m.counts = c;
  m.tpr = ratio(c.tp, c.tp + c.fn);
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

nlohmann::json to_json(const BinaryMetrics& m) {
  return {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn},
          {"tpr", opt(m.tpr)}, {"fpr", opt(m.fpr)}, {"precision", opt(m.precision)}, {"f1", opt(m.f1)}};
}

ConfusionMatrix::ConfusionMatrix(int classes) : k_(classes) {
  if (classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
  cells_.assign(static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_), 0);
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_) throw std::out_of_range("class outside matrix");
  ++cells_[static_cast<std::size_t>(truth * k_ + predicted)];
}

std::uint64_t ConfusionMatrix::at(int truth, int predicted) const {
  return cells_.at(static_cast<std::size_t>(truth * k_ + predicted));
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : cells_) t += v;
  return t;
}

std::optional<double> ConfusionMatrix::accuracy() const {
  std::uint64_t diag = 0;
  for (int c = 0; c < k_; ++c) diag += at(c, c);
  return ratio(diag, total());
}

std::optional<double> ConfusionMatrix::precision(int c) const {
  std::uint64_t col = 0;
  for (int t = 0; t < k_; ++t) col += at(t, c);
  return ratio(at(c, c), col);
}

std::optional<double> ConfusionMatrix::recall(int c) const {
  std::uint64_t row = 0;
  for (int p = 0; p < k_; ++p) row += at(c, p);
  return ratio(at(c, c), row);
}

std::optional<double> ConfusionMatrix::f1(int c) const {
  std::uint64_t row = 0, col = 0;
  for (int i = 0; i < k_; ++i) {
    row += at(c, i);
    col += at(i, c);
  }
  return ratio(2 * at(c, c), row + col);
}

namespace {

template <typename F>
std::optional<double> macro(int k, F f) {
  double s = 0;
  int n = 0;
  for (int c = 0; c < k; ++c)
    if (auto v = f(c)) {
      s += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / n;
}

}  // namespace

std::optional<double> ConfusionMatrix::macro_precision() const {
  return macro(k_, [&](int c) { return precision(c); });
}
std::optional<double> ConfusionMatrix::macro_recall() const {
  return macro(k_, [&](int c) { return recall(c); });
}
std::optional<double> ConfusionMatrix::macro_f1() const {
  return macro(k_, [&](int c) { return f1(c); });
}

void ConfusionMatrix::write_csv(std::ostream& out) const {
  out << "truth\\pred";
  for (int c = 0; c < k_; ++c) out << ',' << c;
  out << '\n';
  for (int t = 0; t < k_; ++t) {
    out << t;
    for (int p = 0; p < k_; ++p) out << ',' << at(t, p);
    out << '\n';
  }
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < k_; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < k_; ++p) row.push_back(at(t, p));
    rows.push_back(row);
  }
  return {{"matrix", rows},
          {"accuracy", opt(accuracy())},
          {"precision", opt(macro_precision())},
          {"recall", opt(macro_recall())},
          {"f1", opt(macro_f1())}};
}

BenchResult bench_throughput(IpsEngine& engine, std::span<const WireFrame> trace) {
  using clock = std::chrono::steady_clock;
  BenchResult r;
  r.frames = trace.size();
  if (trace.empty()) return r;

  std::vector<double> lat(trace.size());
  std::vector<ReleasedFrame> out;
  out.reserve(64);
  const auto begin = clock::now();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto t0 = clock::now();
    const auto& f = trace[i];
    engine.release_due(f.arrival_ns, out);
    engine.ingest_bytes(f.bytes, f.arrival_ns);
    engine.release_due(f.arrival_ns, out);
    engine.maybe_reestimate();
    out.clear();
    lat[i] = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
  }
  engine.flush(out);
  r.seconds = std::chrono::duration<double>(clock::now() - begin).count();
  r.throughput_fps = static_cast<double>(r.frames) / r.seconds;

  auto pct = [&](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(lat.size() - 1));
    std::nth_element(lat.begin(), lat.begin() + static_cast<std::ptrdiff_t>(k), lat.end());
    return lat[k];
  };
  r.p50_us = pct(0.50);
  r.p99_us = pct(0.99);
  r.max_us = *std::max_element(lat.begin(), lat.end());
  return r;
}

nlohmann::json machine_info() {
  std::string model = "unknown";
  std::ifstream cpu("/proc/cpuinfo");
  for (std::string line; std::getline(cpu, line);)
    if (line.rfind("model name", 0) == 0) {
      model = line.substr(line.find(':') + 2);
      break;
    }
  return {{"cpu", model},
          {"logical_cores", std::thread::hardware_concurrency()},
          {"compiler", __VERSION__},
          {"simd", simd::backend_name(simd::active_backend())}};
}

}  // namespace svguard

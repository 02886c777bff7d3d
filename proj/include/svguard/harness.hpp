#pragma once

// Experiment drivers behind the svguard command line. Each command reads a
// JSON config, writes CSV/JSONL/JSON artifacts into the output directory and
// returns a summary. Results depend only on (config, seed); wall-clock
// figures go to a separate timing.json.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "svguard/ips_engine.hpp"
#include "svguard/metrics.hpp"
#include "svguard/netsim.hpp"
#include "svguard/rnn_core.hpp"
#include "svguard/stats_window.hpp"

namespace svguard::harness {

struct RunOptions {
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: no files
  int workers = 0;      // 0: hardware concurrency
  bool verbose = false;
};

/// Parses a JSON file; throws std::runtime_error naming the path on failure.
nlohmann::json load_config(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);
/// out_dir + "/" + name; creates out_dir.
std::string output_path(const RunOptions& opt, const std::string& name);

EngineConfig engine_config_from_json(const nlohmann::json& j);
/// learning_rate, epochs, batch_size, patience, validation_fraction,
/// optimizer ("sgd" | "adam"), momentum, clip_norm. The seed is set by the caller.
rnn::TrainConfig train_config_from_json(const nlohmann::json& j);

/// Runs fn(i) for i in [0, n) on `workers` threads. Results are indexed, so
/// the output does not depend on scheduling. The first exception is
/// rethrown after all workers stop.
template <typename T>
std::vector<T> parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline pieces shared by the commands and the tests

struct IpsRun {
  BinaryCounts counts;
  BinaryMetrics metrics;
  EngineCounters engine;
  // Accepted legitimate frames per stream second (index = second - first).
  std::vector<std::uint64_t> accepted_per_second;
  std::uint64_t malicious_accepted = 0;
  std::uint64_t malicious_total = 0;
  EmgParams final_params;
};

/// Feeds `trace` through a fresh engine in arrival order. Verdicts are
/// written as JSONL when `verdicts` is non-null; `on_accept` sees every
/// accepted shift in release order.
IpsRun run_ips(const sim::ScenarioTrace& trace, const sim::FrameTemplates& templates, const EngineConfig& cfg,
               std::ostream* verdicts = nullptr,
               const std::function<void(double f_as, std::int64_t arrival_ns)>& on_accept = {});

/// Window statistics of the shifts the engine accepts.
std::vector<WindowStats> accepted_windows(const sim::ScenarioTrace& trace, const sim::FrameTemplates& templates,
                                          const EngineConfig& cfg, std::size_t width, std::size_t step,
                                          int source = 0);

/// Window statistics of every received frame's shift against its true slot.
std::vector<WindowStats> received_windows(const sim::ScenarioTrace& trace, std::size_t width, std::size_t step,
                                          int source = 0);

// ---------------------------------------------------------------------------
// Commands

nlohmann::json cmd_fitcheck(const nlohmann::json& cfg, const RunOptions& opt);
nlohmann::json cmd_sweep(const nlohmann::json& cfg, const RunOptions& opt);
nlohmann::json cmd_mitm_grid(const nlohmann::json& cfg, const RunOptions& opt);
nlohmann::json cmd_localize(const nlohmann::json& cfg, const RunOptions& opt);
/// Classifies stats CSV files (one stream per source column value) with a
/// saved model; writes classifications.jsonl.
nlohmann::json cmd_localize_infer(const std::string& model_path, const std::vector<std::string>& stats_paths,
                                  const RunOptions& opt);
nlohmann::json cmd_bench(const nlohmann::json& cfg, const RunOptions& opt);
nlohmann::json cmd_simulate(const nlohmann::json& cfg, const RunOptions& opt);

}  // namespace svguard::harness

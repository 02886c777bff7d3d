#include <cmath>

#include "svguard/harness.hpp"

namespace svguard::harness {

nlohmann::json cmd_bench(const nlohmann::json& cfg, const RunOptions& opt) {
  const auto frames = cfg.value("frames", std::size_t{1000000});
  nlohmann::json sj = {{"topology", cfg.value("topology", nlohmann::json::object())},
                       {"stream", cfg.value("stream", nlohmann::json::object())}};
  sim::Scenario sc = sim::scenario_from_json(sj);
  sc.stream.duration_s = std::ceil(static_cast<double>(frames) / sc.stream.fs);
  sc.seed = opt.seed;
  auto trace = sim::simulate(sc.topology, sc.stream, sc.seed).at(0);
  if (trace.arrivals.size() > frames) trace.arrivals.resize(frames);

  const sim::FrameTemplates templates(sc.stream);
  std::vector<WireFrame> wire;
  wire.reserve(trace.arrivals.size());
  for (const auto& a : trace.arrivals) wire.push_back({templates.bytes(trace.smp_cnt(a)), a.t_ns});

  IpsEngine engine(engine_config_from_json(cfg.value("engine", nlohmann::json::object())));
  const auto r = bench_throughput(engine, wire);
  nlohmann::json out = {{"frames", r.frames},
                        {"seconds", r.seconds},
                        {"throughput_fps", r.throughput_fps},
                        {"p50_us", r.p50_us},
                        {"p99_us", r.p99_us},
                        {"max_us", r.max_us},
                        {"accepted", engine.counters().accepted},
                        {"machine", machine_info()}};
  if (!opt.out_dir.empty()) write_json(output_path(opt, "timing.json"), out);
  return out;
}

}  // namespace svguard::harness

#include <ostream>

#include "svguard/harness.hpp"

namespace svguard::harness {

IpsRun run_ips(const sim::ScenarioTrace& trace, const sim::FrameTemplates& templates, const EngineConfig& cfg,
               std::ostream* verdicts, const std::function<void(double, std::int64_t)>& on_accept) {
  IpsRun run;
  if (cfg.fs != trace.fs) throw std::invalid_argument("engine and trace sampling rates differ");
  IpsEngine engine(cfg);
  const auto& arr = trace.arrivals;
  std::int64_t first_second = 0, last_second = 0;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (arr[i].label != Label::Legitimate) continue;
    const std::int64_t s = arr[i].slot / trace.fs;
    if (i == 0 || s < first_second) first_second = s;
    last_second = std::max(last_second, s);
  }
  if (!arr.empty()) run.accepted_per_second.assign(static_cast<std::size_t>(last_second - first_second + 1), 0);

  engine.set_verdict_sink([&](const Verdict& v) {
    const auto& a = arr[static_cast<std::size_t>(v.frame_id)];
    const bool discarded = is_discard(v.decision);
    run.counts.add(a.label, discarded);
    if (a.label == Label::Malicious) {
      ++run.malicious_total;
      if (!discarded) ++run.malicious_accepted;
    } else if (!discarded) {
      const std::int64_t s = a.slot / trace.fs - first_second;
      if (s >= 0 && s < static_cast<std::int64_t>(run.accepted_per_second.size()))
        ++run.accepted_per_second[static_cast<std::size_t>(s)];
    }
    if (verdicts) write_verdict(*verdicts, v);
  });
  if (on_accept) engine.set_accepted_hook(on_accept);

  std::vector<ReleasedFrame> out;
  for (const auto& a : arr) {
    engine.process(ArrivedFrame{templates.frame(trace.smp_cnt(a)), a.t_ns, 0}, out);
    out.clear();
  }
  engine.flush(out);
  run.metrics = binary_metrics(run.counts);
  run.engine = engine.counters();
  run.final_params = engine.params();
  return run;
}

std::vector<WindowStats> accepted_windows(const sim::ScenarioTrace& trace, const sim::FrameTemplates& templates,
                                          const EngineConfig& cfg, std::size_t width, std::size_t step, int source) {
  SlidingWindows win(width, step, source);
  std::vector<WindowStats> out;
  run_ips(trace, templates, cfg, nullptr, [&](double f_as, std::int64_t t) {
    if (auto w = win.push(f_as, t)) out.push_back(*w);
  });
  return out;
}

std::vector<WindowStats> received_windows(const sim::ScenarioTrace& trace, std::size_t width, std::size_t step,
                                          int source) {
  const auto shifts = sim::true_shifts(trace);
  std::vector<std::int64_t> times;
  times.reserve(trace.arrivals.size());
  for (const auto& a : trace.arrivals) times.push_back(a.t_ns);
  return windows(shifts, width, step, source, times);
}

}  // namespace svguard::harness

#include <fstream>

#include "svguard/harness.hpp"

namespace svguard::harness {

namespace {

std::string file_safe(std::string s) {
  for (auto& c : s)
    if (c == '/' || c == ' ') c = '_';
  return s;
}

}  // namespace

nlohmann::json cmd_simulate(const nlohmann::json& cfg, const RunOptions& opt) {
  sim::Scenario sc = sim::scenario_from_json(cfg);
  sc.seed = opt.seed;
  const auto res = sim::run_scenario(sc);
  const sim::FrameTemplates templates(sc.stream);
  const bool with_ips = cfg.value("run_ips", false);
  const EngineConfig ecfg = engine_config_from_json(cfg.value("engine", nlohmann::json::object()));

  nlohmann::json summary = {{"seed", opt.seed}, {"attack", sim::to_string(sc.attack.kind)},
                            {"self_report", res.self_report}, {"points", nlohmann::json::array()}};
  for (std::size_t p = 0; p < res.traces.size(); ++p) {
    const auto& tr = res.traces[p];
    nlohmann::json point = {{"observer", tr.observer},
                            {"frames", tr.arrivals.size()},
                            {"legitimate", tr.count(Label::Legitimate)},
                            {"malicious", tr.count(Label::Malicious)}};
    if (!opt.out_dir.empty()) {
      std::ofstream out(output_path(opt, "trace_" + file_safe(tr.observer) + ".jsonl"));
      const auto records = sim::to_records(tr, templates, static_cast<std::uint16_t>(p));
      write_trace(records, out);
    }
    if (with_ips) {
      std::ofstream verdicts;
      if (!opt.out_dir.empty()) verdicts.open(output_path(opt, "verdicts_" + file_safe(tr.observer) + ".jsonl"));
      const auto run = run_ips(tr, templates, ecfg, verdicts.is_open() ? &verdicts : nullptr);
      point["ips"] = to_json(run.metrics);
    }
    summary["points"].push_back(point);
  }
  if (!opt.out_dir.empty()) write_json(output_path(opt, "simulate.json"), summary);
  return summary;
}

}  // namespace svguard::harness

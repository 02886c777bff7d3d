#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "svguard/harness.hpp"

namespace svguard::harness {

namespace {

std::vector<double> error_grid(const nlohmann::json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<double>());
  } else {
    const double lo = j.at("min").get<double>(), hi = j.at("max").get<double>(), step = j.at("step").get<double>();
    if (!(step > 0) || hi < lo) throw std::invalid_argument("errors_us: need min <= max and step > 0");
    const double n = (hi - lo) / step;
    if (std::abs(n - std::round(n)) > 1e-9) throw std::invalid_argument("errors_us: step does not divide the range");
    for (long k = 0; k <= std::lround(n); ++k) out.push_back(lo + static_cast<double>(k) * step);
  }
  if (out.empty()) throw std::invalid_argument("errors_us: empty grid");
  return out;
}

struct Job {
  std::size_t profile = 0;
  std::optional<double> error_us;  // nullopt: no attack
};

struct Outcome {
  IpsRun run;
  double realized_std_us = 0.0;
};

std::string opt_num(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

// Minimum over full seconds; the first and last seconds can be partial.
std::uint64_t interior_min(const std::vector<std::uint64_t>& v) {
  if (v.size() < 3) return 0;
  return *std::min_element(v.begin() + 1, v.end() - 1);
}

}  // namespace

nlohmann::json cmd_sweep(const nlohmann::json& cfg, const RunOptions& opt) {
  const auto errors = error_grid(cfg.at("errors_us"));
  const auto& profiles = cfg.at("profiles");
  if (!profiles.is_array() || profiles.empty()) throw std::invalid_argument("sweep needs at least one profile");
  const EngineConfig ecfg = engine_config_from_json(cfg.value("engine", nlohmann::json::object()));
  const auto stream = cfg.value("stream", nlohmann::json::object());
  auto attack = cfg.value("attack", nlohmann::json::object());
  attack["kind"] = "spoofing";
  if (!attack.contains("stop_s")) attack["stop_s"] = stream.value("duration_s", 10.0);

  std::vector<Job> jobs;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    jobs.push_back({p, std::nullopt});
    for (double e : errors) jobs.push_back({p, e});
  }

  const auto outcomes = parallel_map<Outcome>(jobs.size(), opt.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    nlohmann::json sj = {{"stream", stream}, {"topology", profiles[job.profile].at("topology")}};
    if (job.error_us) {
      sj["attack"] = attack;
      sj["attack"]["error_us"] = *job.error_us;
    }
    sim::Scenario sc = sim::scenario_from_json(sj);
    // Same seed for every grid point of a profile: legitimate traffic is
    // identical across the sweep.
    sc.seed = sim::derive_seed(opt.seed, job.profile);
    auto res = sim::run_scenario(sc);
    const auto& tr = res.traces.at(0);
    Outcome o;
    std::vector<sim::Arrival> legit;
    for (const auto& a : tr.arrivals)
      if (a.label == Label::Legitimate) legit.push_back(a);
    sim::ScenarioTrace clean{tr.observer, tr.fs, legit};
    o.realized_std_us = window_stats(sim::true_shifts(clean)).std * 1e6;
    o.run = run_ips(tr, sim::FrameTemplates(sc.stream), ecfg);
    return o;
  });

  nlohmann::json summary = {{"seed", opt.seed}, {"profiles", nlohmann::json::array()}, {"rows", nlohmann::json::array()}};
  std::ofstream csv;
  if (!opt.out_dir.empty()) {
    csv.open(output_path(opt, "sweep.csv"));
    csv << "profile,error_us,realized_std_us,fpr,tpr,precision,f1,malicious_accept_rate,malicious_frames,"
           "legitimate_frames,tp,fp,tn,fn,flood,replay,outscored,latency\n";
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    const auto& o = outcomes[i];
    const std::string name = profiles[job.profile].value("name", "profile" + std::to_string(job.profile));
    const auto& m = o.run.metrics;
    const auto& c = m.counts;
    if (!job.error_us) {
      summary["profiles"].push_back({{"name", name},
                                     {"realized_std_us", o.realized_std_us},
                                     {"no_attack", to_json(m)},
                                     {"accepted_per_second_min", interior_min(o.run.accepted_per_second)}});
      continue;
    }
    const std::optional<double> mal_rate =
        o.run.malicious_total ? std::optional<double>(static_cast<double>(o.run.malicious_accepted) /
                                                      static_cast<double>(o.run.malicious_total))
                              : std::nullopt;
    nlohmann::json row = to_json(m);
    row["profile"] = name;
    row["error_us"] = *job.error_us;
    row["realized_std_us"] = o.realized_std_us;
    row["malicious_accept_rate"] = mal_rate ? nlohmann::json(*mal_rate) : nlohmann::json(nullptr);
    row["malicious_frames"] = o.run.malicious_total;
    summary["rows"].push_back(row);
    if (csv.is_open()) {
      char head[160];
      std::snprintf(head, sizeof head, "%s,%.3f,%.3f,", name.c_str(), *job.error_us, o.realized_std_us);
      csv << head << opt_num(m.fpr) << ',' << opt_num(m.tpr) << ',' << opt_num(m.precision) << ',' << opt_num(m.f1)
          << ',' << opt_num(mal_rate) << ',' << o.run.malicious_total << ',' << (c.fp + c.tn) << ',' << c.tp << ','
          << c.fp << ',' << c.tn << ',' << c.fn << ',' << o.run.engine.flood << ',' << o.run.engine.replay << ','
          << o.run.engine.outscored << ',' << o.run.engine.latency << '\n';
    }
  }
  if (!opt.out_dir.empty()) write_json(output_path(opt, "sweep.json"), summary);
  return summary;
}

}  // namespace svguard::harness

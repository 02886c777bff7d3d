#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "svguard/harness.hpp"
#include "svguard/mitm_detector.hpp"

namespace svguard::harness {

namespace {

using Seqs = std::vector<std::vector<WindowStats>>;

std::vector<double> num_list(const nlohmann::json& j, const char* key, std::vector<double> def) {
  if (!j.contains(key)) return def;
  return j.at(key).get<std::vector<double>>();
}

void append(Seqs& dst, Seqs&& src) {
  for (auto& s : src) dst.push_back(std::move(s));
}

std::vector<double> scores(const MitmModel& m, const Seqs& seqs) {
  std::vector<double> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(score(m, s));
  return out;
}

}  // namespace

nlohmann::json cmd_mitm_grid(const nlohmann::json& cfg, const RunOptions& opt) {
  const EngineConfig ecfg = engine_config_from_json(cfg.value("engine", nlohmann::json::object()));
  const std::size_t width = cfg.value("window", std::size_t{200});
  const std::size_t step = cfg.value("step", std::size_t{50});
  const int seq_len = cfg.value("sequence_length", 16);
  const std::size_t stride = cfg.value("stride", std::size_t{4});
  const int n_train = cfg.value("train_traces", 4);
  const int n_cal = cfg.value("calibration_traces", 2);
  const int n_test = cfg.value("test_traces", 2);
  const double target_fpr = cfg.value("target_fpr", 0.0015);
  const auto dms = num_list(cfg, "dm_us", {0, 20, 50, 100, 200, 300});
  const auto dss = num_list(cfg, "ds", {0, 0.05, 0.10});
  const auto bj = cfg.value("bounds", nlohmann::json::object());
  const PerturbBounds bounds{bj.value("dm_us", 300.0) * 1e-6, bj.value("ds", 0.10), bj.value("dg", 0.05)};
  if (n_train <= 0 || n_cal <= 0 || n_test <= 0) throw std::invalid_argument("trace counts must be positive");

  // Independent normal traces of the same profile; trace i uses seed
  // derive_seed(seed, i).
  const nlohmann::json sj = {{"stream", cfg.value("stream", nlohmann::json::object())},
                             {"topology", cfg.at("topology")}};
  const std::size_t n_traces = static_cast<std::size_t>(n_train + n_cal + n_test);
  const auto per_trace = parallel_map<Seqs>(n_traces, opt.workers, [&](std::size_t i) {
    sim::Scenario sc = sim::scenario_from_json(sj);
    sc.seed = sim::derive_seed(opt.seed, i);
    const auto tr = sim::simulate(sc.topology, sc.stream, sc.seed).at(0);
    const auto w = accepted_windows(tr, sim::FrameTemplates(sc.stream), ecfg, width, step);
    return rolling_sequences(w, static_cast<std::size_t>(seq_len), stride);
  });
  Seqs train_seqs, cal_seqs, test_seqs;
  for (std::size_t i = 0; i < n_traces; ++i) {
    auto s = per_trace[i];
    if (i < static_cast<std::size_t>(n_train))
      append(train_seqs, std::move(s));
    else if (i < static_cast<std::size_t>(n_train + n_cal))
      append(cal_seqs, std::move(s));
    else
      append(test_seqs, std::move(s));
  }
  if (train_seqs.empty() || cal_seqs.empty() || test_seqs.empty())
    throw std::invalid_argument("traces too short for the configured sequence length");

  MitmModel model = make_mitm_model(sim::derive_seed(opt.seed, 0x3170), cfg.value("layers", 4), cfg.value("hidden", 20));
  model.sequence_length = seq_len;
  const auto training = make_training_set(train_seqs, bounds, sim::derive_seed(opt.seed, 0x7A1));
  auto tcfg = train_config_from_json(cfg.value("train", nlohmann::json::object()));
  tcfg.seed = sim::derive_seed(opt.seed, 0x7A2);
  const auto res = train_mitm(model, training, tcfg);

  const auto cal_scores = scores(model, cal_seqs);
  model.threshold = calibrate_threshold(cal_scores, target_fpr);
  model.calibrated = true;
  std::size_t cal_alarms = 0;
  for (double s : cal_scores) cal_alarms += s > model.threshold;

  const auto normal_scores = scores(model, test_seqs);
  BinaryCounts normal_counts;
  for (double s : normal_scores) normal_counts.add(Label::Legitimate, s > model.threshold);

  // Positives alternate +dm / -dm over the test sequences.
  struct Cell {
    double dm_us, ds;
    BinaryMetrics m;
  };
  std::vector<std::pair<double, double>> grid;
  for (double dm : dms)
    for (double ds : dss) grid.emplace_back(dm, ds);
  const auto cells = parallel_map<Cell>(grid.size(), opt.workers, [&](std::size_t g) {
    const auto [dm, ds] = grid[g];
    BinaryCounts c = normal_counts;
    for (std::size_t i = 0; i < test_seqs.size(); ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      const auto p = perturb(test_seqs[i], sim::MitmDelta{sign * dm * 1e-6, ds, 0.0});
      c.add(Label::Malicious, score(model, p) > model.threshold);
    }
    return Cell{dm, ds, binary_metrics(c)};
  });

  nlohmann::json summary = {{"seed", opt.seed},
                            {"threshold", model.threshold},
                            {"target_fpr", target_fpr},
                            {"calibration_sequences", cal_seqs.size()},
                            {"calibration_alarms", cal_alarms},
                            {"train_sequences", training.size()},
                            {"test_sequences", test_seqs.size()},
                            {"test_normal", to_json(binary_metrics(normal_counts))},
                            {"best_epoch", res.best_epoch},
                            {"epochs_run", res.history.size()},
                            {"grid", nlohmann::json::array()}};
  for (const auto& c : cells) {
    auto row = to_json(c.m);
    row["dm_us"] = c.dm_us;
    row["ds"] = c.ds;
    summary["grid"].push_back(row);
  }

  if (!opt.out_dir.empty()) {
    std::ofstream csv(output_path(opt, "mitm_grid.csv"));
    csv << "dm_us,ds,f1,tpr,fpr,tp,fp,tn,fn\n";
    char line[200];
    for (const auto& c : cells) {
      std::snprintf(line, sizeof line, "%.1f,%.3f,%.6f,%.6f,%.6f,", c.dm_us, c.ds, c.m.f1.value_or(0.0),
                    c.m.tpr.value_or(0.0), c.m.fpr.value_or(0.0));
      csv << line << c.m.counts.tp << ',' << c.m.counts.fp << ',' << c.m.counts.tn << ',' << c.m.counts.fn << '\n';
    }
    std::ofstream hist(output_path(opt, "mitm_training.csv"));
    hist << "epoch,train_loss,val_loss,val_accuracy\n";
    for (const auto& e : res.history) {
      std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.6f\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
      hist << line;
    }
    std::ofstream alerts(output_path(opt, "mitm_alerts.jsonl"));
    for (std::size_t i = 0; i < test_seqs.size(); ++i)
      write_alert(alerts, test_seqs[i].back().start_ns, normal_scores[i], model.threshold);
    save_mitm_model(output_path(opt, "mitm_model.bin"), model, opt.seed);
    write_json(output_path(opt, "mitm_grid.json"), summary);
  }
  return summary;
}

}  // namespace svguard::harness

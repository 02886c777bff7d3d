#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "svguard/harness.hpp"
#include "svguard/source_localizer.hpp"

namespace svguard::harness {

namespace {

struct Range {
  double lo = 0.0, hi = 0.0;
};

Range range_from(const nlohmann::json& j, const char* key, Range def) {
  if (!j.contains(key)) return def;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2 || v[0] > v[1]) throw std::invalid_argument(std::string(key) + ": expected [lo, hi]");
  return {v[0], v[1]};
}

Part part_from(const std::string& s) {
  if (s == "normal") return Part::Normal;
  if (s == "anomalous") return Part::Anomalous;
  throw std::invalid_argument("split part must be 'normal' or 'anomalous', got '" + s + "'");
}

ScenarioSplit split_from_json(const nlohmann::json& j) {
  if (j.is_null()) return ScenarioSplit::reference();
  ScenarioSplit s;
  for (const auto& e : j.at("train")) s.train.insert({e.at(0).get<int>(), part_from(e.at(1).get<std::string>())});
  for (const auto& e : j.at("test")) s.test.insert({e.at(0).get<int>(), part_from(e.at(1).get<std::string>())});
  return s;
}

struct Generated {
  Acquisition acq;
  nlohmann::json info;
  std::vector<std::vector<WindowStats>> stats;  // kept only when exported
};

nlohmann::json eval_json(const LocalizerEval& ev) {
  auto j = ev.confusion.to_json();
  j["normal_fpr"] = ev.normal_fpr ? nlohmann::json(*ev.normal_fpr) : nlohmann::json(nullptr);
  j["adjacent_share"] = ev.adjacent_share ? nlohmann::json(*ev.adjacent_share) : nlohmann::json(nullptr);
  j["errors"] = ev.errors;
  return j;
}

void write_classification(std::ostream& out, std::int64_t t_ns, int scenario, int label, std::span<const double> probs) {
  char buf[64];
  out << "{\"t\":" << t_ns;
  if (scenario > 0) out << ",\"scenario\":" << scenario << ",\"label\":" << label;
  out << ",\"predicted\":" << predicted_class(probs) << ",\"probs\":[";
  for (std::size_t k = 0; k < probs.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%s%.6f", k ? "," : "", probs[k]);
    out << buf;
  }
  out << "]}\n";
}

}  // namespace

nlohmann::json cmd_localize(const nlohmann::json& cfg, const RunOptions& opt) {
  const int ieds = cfg.value("ieds", 5);
  const std::size_t width = cfg.value("window", std::size_t{200});
  const std::size_t step = cfg.value("step", std::size_t{50});
  const std::size_t seq_len = cfg.value("sequence_length", std::size_t{16});
  const std::size_t stride = cfg.value("stride", std::size_t{4});
  const std::size_t test_stride = cfg.value("test_stride", stride);
  const bool export_stats = cfg.value("export_stats", false);
  const auto stream_j = cfg.value("stream", nlohmann::json::object());
  const auto& scenarios = cfg.at("scenarios");
  const auto aj = cfg.value("attack", nlohmann::json::object());
  const Range dm = range_from(aj, "dm_us", {50, 300});
  const Range ds = range_from(aj, "ds", {0.0, 0.10});
  const Range dg = range_from(aj, "dg", {-0.05, 0.05});
  const double attack_start_s = aj.value("start_s", 0.0);
  const double self_p = aj.value("self_report_probability", 0.5);
  const double segment_s = aj.value("segment_s", 0.0);
  const ScenarioSplit split = split_from_json(cfg.value("split", nlohmann::json()));
  split.validate();

  const int n_scen = static_cast<int>(scenarios.size());
  const int per_scen = ieds + 1;
  const auto generated = parallel_map<Generated>(
      static_cast<std::size_t>(n_scen * per_scen), opt.workers, [&](std::size_t i) {
        const int s = static_cast<int>(i) / per_scen + 1;
        const int c = static_cast<int>(i) % per_scen;
        const auto& sj = scenarios[static_cast<std::size_t>(s - 1)];
        nlohmann::json topo = sj;
        topo["kind"] = "ring";
        topo["ieds"] = ieds;
        sim::Scenario sc = sim::scenario_from_json({{"stream", stream_j}, {"topology", topo}});
        sc.seed = sim::derive_seed(opt.seed, static_cast<std::uint64_t>(100 * s + c));
        auto traces = sim::simulate(sc.topology, sc.stream, sc.seed);

        Generated g;
        g.info = {{"scenario", s}, {"compromised", c}};
        const std::int64_t t0 = sc.stream.start_second * 1'000'000'000LL;
        const std::int64_t start_ns = t0 + static_cast<std::int64_t>(attack_start_s * 1e9);
        const std::int64_t stop_ns = t0 + static_cast<std::int64_t>((sc.stream.duration_s + 1.0) * 1e9);
        if (c > 0) {
          std::mt19937_64 rng(sim::derive_seed(sc.seed, 0xC0));
          std::bernoulli_distribution self_report(self_p);
          std::uniform_real_distribution<double> u(0.0, 1.0);
          // The tampering statistics, and whether the compromised IED reports
          // its own tampered NICs, are redrawn every segment_s seconds.
          const std::int64_t seg_ns =
              segment_s > 0 ? static_cast<std::int64_t>(segment_s * 1e9) : stop_ns - start_ns;
          struct Segment {
            std::int64_t a, b;
            sim::MitmDelta d;
            bool self;
          };
          std::vector<Segment> segments;
          for (std::int64_t a = start_ns; a < stop_ns;) {
            // A remainder shorter than a segment joins the last one.
            const std::int64_t b = a + 2 * seg_ns > stop_ns ? stop_ns : a + seg_ns;
            const sim::MitmDelta d{(dm.lo + (dm.hi - dm.lo) * u(rng)) * 1e-6, ds.lo + (ds.hi - ds.lo) * u(rng),
                                   dg.lo + (dg.hi - dg.lo) * u(rng)};
            segments.push_back({a, b, d, self_report(rng)});
            a = b;
          }
          // Latest segment first: frames pushed past a boundary are then not
          // perturbed twice.
          nlohmann::json deltas = nlohmann::json::array();
          for (auto it = segments.rbegin(); it != segments.rend(); ++it)
            for (int p : sim::ring_affected_points(ieds, c, it->self))
              sim::apply_mitm(traces.at(static_cast<std::size_t>(p)), it->d, it->a, it->b, width);
          for (const auto& sg : segments)
            deltas.push_back({{"start_s", static_cast<double>(sg.a - t0) * 1e-9}, {"dm_us", sg.d.dm_s * 1e6},
                              {"ds", sg.d.ds}, {"dg", sg.d.dg}, {"self_report", sg.self}});
          g.info["segments"] = deltas;
        }
        std::vector<std::vector<WindowStats>> per_point;
        for (std::size_t p = 0; p < traces.size(); ++p)
          per_point.push_back(received_windows(traces[p], width, step, static_cast<int>(p)));
        g.acq.scenario = s;
        g.acq.compromised = c;
        g.acq.frames = build_features(per_point);
        for (const auto& f : g.acq.frames) g.acq.frame_labels.push_back(c > 0 && f.start_ns >= start_ns ? c : 0);
        if (export_stats) g.stats = std::move(per_point);
        return g;
      });

  const int points = 2 * ieds;
  std::vector<LabeledFeatureSequence> train, test;
  std::vector<int> test_scenario;
  nlohmann::json acquisitions = nlohmann::json::array();
  for (const auto& g : generated) {
    const SplitKey key{g.acq.scenario, g.acq.compromised == 0 ? Part::Normal : Part::Anomalous};
    const bool in_train = split.train.count(key) > 0, in_test = split.test.count(key) > 0;
    auto info = g.info;
    info["role"] = in_train ? "train" : (in_test ? "test" : "unused");
    info["frames"] = g.acq.frames.size();
    acquisitions.push_back(info);
    if (in_train)
      for (auto& s : feature_sequences(g.acq, seq_len, stride)) train.push_back(std::move(s));
    if (in_test)
      for (auto& s : feature_sequences(g.acq, seq_len, test_stride)) {
        test.push_back(std::move(s));
        test_scenario.push_back(g.acq.scenario);
      }
  }
  if (train.empty() || test.empty()) throw std::invalid_argument("split leaves the training or test set empty");

  auto tcfg = train_config_from_json(cfg.value("train", nlohmann::json::object()));
  tcfg.seed = sim::derive_seed(opt.seed, 0x10C);
  const auto trained = train_localizer(train, points, ieds, tcfg, cfg.value("layers", 5), cfg.value("hidden", 26));
  const auto& model = trained.model;
  const auto train_eval = evaluate_localizer(model, train);
  const auto test_eval = evaluate_localizer(model, test);

  nlohmann::json summary = {{"seed", opt.seed},
                            {"points", points},
                            {"features", feature_count(points)},
                            {"train_sequences", train.size()},
                            {"test_sequences", test.size()},
                            {"best_epoch", trained.history.best_epoch},
                            {"epochs_run", trained.history.history.size()},
                            {"train", eval_json(train_eval)},
                            {"test", eval_json(test_eval)},
                            {"acquisitions", acquisitions}};

  if (!opt.out_dir.empty()) {
    {
      std::ofstream out(output_path(opt, "confusion_test.csv"));
      test_eval.confusion.write_csv(out);
    }
    {
      std::ofstream out(output_path(opt, "confusion_train.csv"));
      train_eval.confusion.write_csv(out);
    }
    std::ofstream cls(output_path(opt, "classifications.jsonl"));
    for (std::size_t i = 0; i < test.size(); ++i)
      write_classification(cls, test[i].frames.back().start_ns, test_scenario[i], test[i].label,
                           localize(model, test[i].frames));
    std::ofstream hist(output_path(opt, "localize_training.csv"));
    hist << "epoch,train_loss,val_loss,val_accuracy\n";
    char line[160];
    for (const auto& e : trained.history.history) {
      std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.6f\n", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
      hist << line;
    }
    if (export_stats)
      for (const auto& g : generated) {
        std::ofstream out(output_path(opt, "stats_s" + std::to_string(g.acq.scenario) + "_c" +
                                               std::to_string(g.acq.compromised) + ".csv"));
        bool header = true;
        for (const auto& p : g.stats) {
          write_stats_csv(out, p, header);
          header = false;
        }
      }
    save_localizer(output_path(opt, "localizer_model.bin"), model, opt.seed);
    write_json(output_path(opt, "localize.json"), summary);
  }
  return summary;
}

nlohmann::json cmd_localize_infer(const std::string& model_path, const std::vector<std::string>& stats_paths,
                                  const RunOptions& opt) {
  const auto model = load_localizer(model_path);
  std::map<int, std::vector<WindowStats>> by_source;
  for (const auto& path : stats_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    for (const auto& w : read_stats_csv(in)) by_source[w.source].push_back(w);
  }
  if (static_cast<int>(by_source.size()) != model.points)
    throw std::invalid_argument("model expects " + std::to_string(model.points) + " observation points, stats have " +
                                std::to_string(by_source.size()));
  std::vector<std::vector<WindowStats>> per_point;
  for (auto& [src, w] : by_source) per_point.push_back(std::move(w));
  const auto frames = build_features(per_point);

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(model.devices + 1), 0);
  std::ofstream out;
  if (!opt.out_dir.empty()) out.open(output_path(opt, "classifications.jsonl"));
  const auto len = static_cast<std::size_t>(model.sequence_length);
  for (std::size_t i = 0; i + len <= frames.size(); ++i) {
    const std::span<const FeatureFrame> seq(frames.data() + i, len);
    const auto probs = localize(model, seq);
    ++counts[static_cast<std::size_t>(predicted_class(probs))];
    if (out.is_open()) write_classification(out, seq.back().start_ns, 0, 0, probs);
  }
  return {{"frames", frames.size()}, {"predicted_counts", counts}};
}

}  // namespace svguard::harness

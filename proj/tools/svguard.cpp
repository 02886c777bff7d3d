// svguard: experiment driver.
//
//   svguard <fitcheck|sweep|mitm-grid|localize|bench|simulate> --config FILE
//           [--seed N] [--out DIR] [--workers N]
//
// Flags fall back to SVGUARD_SEED, SVGUARD_OUT and SVGUARD_WORKERS. Without
// --seed the config's "seed" field is used, then 1.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "svguard/harness.hpp"

namespace h = svguard::harness;

int main(int argc, char** argv) {
  CLI::App app{"SV arrival-time intrusion prevention experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool verbose = false;
  app.add_option("--seed", seed, "Master seed")->envname("SVGUARD_SEED");
  app.add_option("--out", out_dir, "Output directory")->envname("SVGUARD_OUT");
  app.add_option("--workers", workers, "Worker threads, 0 = all cores")->envname("SVGUARD_WORKERS");
  app.add_flag("-v,--verbose", verbose);

  std::string infer_model;
  std::vector<std::string> infer_stats;
  auto add = [&](const char* name, const char* help, bool needs_config = true) {
    auto* sub = app.add_subcommand(name, help);
    auto* c = sub->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    return sub;
  };
  auto* fitcheck = add("fitcheck", "EMG vs Gaussian vs Exponential fit of arrival shifts");
  auto* sweep = add("sweep", "Spoofing injection-error sweep");
  auto* mitm = add("mitm-grid", "Train the MitM detector and evaluate the perturbation grid");
  auto* localize = add("localize", "Attack source localization protocol", false);
  localize->add_option("--model", infer_model, "Classify stats CSVs with a saved model instead of training")
      ->check(CLI::ExistingFile);
  localize->add_option("--stats", infer_stats, "Window statistics CSV files")->check(CLI::ExistingFile);
  auto* bench = add("bench", "Throughput and per-frame latency");
  auto* simulate = add("simulate", "Generate subscriber traces for a scenario");

  CLI11_PARSE(app, argc, argv);

  try {
    h::RunOptions opt;
    opt.out_dir = out_dir;
    opt.workers = workers;
    opt.verbose = verbose;
    nlohmann::json cfg;
    if (!config.empty()) cfg = h::load_config(config);
    opt.seed = seed ? *seed : cfg.value("seed", std::uint64_t{1});

    nlohmann::json summary;
    if (fitcheck->parsed()) {
      summary = h::cmd_fitcheck(cfg, opt);
    } else if (sweep->parsed()) {
      summary = h::cmd_sweep(cfg, opt);
    } else if (mitm->parsed()) {
      summary = h::cmd_mitm_grid(cfg, opt);
    } else if (localize->parsed()) {
      if (!infer_model.empty()) {
        if (infer_stats.empty()) throw std::invalid_argument("--model needs --stats");
        summary = h::cmd_localize_infer(infer_model, infer_stats, opt);
      } else if (config.empty()) {
        throw std::invalid_argument("localize needs --config or --model");
      } else {
        summary = h::cmd_localize(cfg, opt);
      }
    } else if (bench->parsed()) {
      summary = h::cmd_bench(cfg, opt);
    } else if (simulate->parsed()) {
      summary = h::cmd_simulate(cfg, opt);
    }
    std::cout << summary.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::fprintf(stderr, "svguard: %s\n", e.what());
    return 1;
  }
  return 0;
}

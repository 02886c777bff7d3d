#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "svguard/harness.hpp"

namespace svguard::harness {

namespace {

std::vector<double> shifts_from_trace_file(const std::string& path, int fs) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  const auto trace = read_trace(in);
  const StreamTiming timing(fs);
  std::vector<FrameTime> times;
  for (const auto& r : trace.records) {
    const auto bytes = from_hex(r.frame_hex);
    if (!bytes) continue;
    const auto frame = decode(*bytes);
    if (const auto* f = std::get_if<SvFrame>(&frame); f && timing.valid_counter(f->smp_cnt))
      times.push_back({r.arrival_ns, f->smp_cnt});
  }
  std::vector<double> naive;
  for (const auto& t : times) naive.push_back(arrival_shift(t.arrival_ns, t.smp_cnt, timing, 0.0).shift_s);
  if (naive.empty()) return naive;
  auto sorted = naive;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double med = sorted[sorted.size() / 2];
  std::vector<double> out;
  for (const auto& t : times) out.push_back(arrival_shift(t.arrival_ns, t.smp_cnt, timing, med).shift_s);
  return out;
}

double gauss_pdf(double x, double m, double s) {
  const double z = (x - m) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2 * std::numbers::pi));
}

double exp_pdf(double x, double loc, double rate) { return x < loc ? 0.0 : rate * std::exp(-rate * (x - loc)); }

}  // namespace

nlohmann::json cmd_fitcheck(const nlohmann::json& cfg, const RunOptions& opt) {
  std::vector<double> x;
  std::string source;
  if (cfg.contains("synthetic")) {
    const auto& s = cfg["synthetic"];
    const double mu = s.value("mu_us", 100.0) * 1e-6, sigma = s.value("sigma_us", 10.0) * 1e-6,
                 tau = s.value("tau_us", 20.0) * 1e-6;
    const auto n = s.value("n", std::size_t{100000});
    std::mt19937_64 rng(sim::derive_seed(opt.seed, 0xF17));
    std::normal_distribution<double> g(0.0, 1.0);
    std::exponential_distribution<double> e(1.0);
    for (std::size_t i = 0; i < n; ++i) x.push_back(mu + sigma * g(rng) + (tau > 0 ? tau * e(rng) : 0.0));
    source = "synthetic";
  } else if (cfg.contains("trace")) {
    x = shifts_from_trace_file(cfg["trace"].get<std::string>(), cfg.value("fs", 4800));
    source = "trace";
  } else {
    sim::Scenario sc = sim::scenario_from_json(cfg.value("scenario", nlohmann::json::object()));
    sc.seed = opt.seed;
    const auto res = sim::run_scenario(sc);
    x = sim::true_shifts(res.traces.at(0));
    source = "scenario";
  }
  if (x.size() < 10000) throw std::invalid_argument("fitcheck needs at least 10^4 frames, got " + std::to_string(x.size()));

  const auto m = batch_moments(x);
  // Constant input leaves rounding residue of order eps * |mean|.
  if (!(std::sqrt(m.m2) > 1e-13 * std::abs(m.m1))) throw std::invalid_argument("degenerate trace: zero variance");
  const EmgParams emg = estimate_mme(m.m1, m.m2, m.m3);
  const double sd = std::sqrt(m.m2);
  const double lo = *std::min_element(x.begin(), x.end());
  const double hi = *std::max_element(x.begin(), x.end());
  const double rate = 1.0 / (m.m1 - lo);

  double ll_emg = 0, ll_gauss = 0, ll_exp = 0;
  for (double v : x) {
    ll_emg += std::log(std::max(emg_pdf(v, emg), 1e-300));
    ll_gauss += std::log(std::max(gauss_pdf(v, m.m1, sd), 1e-300));
    ll_exp += std::log(std::max(exp_pdf(v, lo, rate), 1e-300));
  }
  const double n = static_cast<double>(x.size());

  const int bins = cfg.value("bins", 100);
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (double v : x) {
    auto b = static_cast<std::size_t>(width > 0 ? (v - lo) / width : 0);
    counts[std::min(b, counts.size() - 1)]++;
  }

  nlohmann::json summary = {
      {"source", source},
      {"frames", x.size()},
      {"mean_us", m.m1 * 1e6},
      {"std_us", sd * 1e6},
      {"skewness", m.m3 / (m.m2 * sd)},
      {"emg", {{"mu_us", emg.mu * 1e6}, {"sigma_us", emg.sigma * 1e6}, {"tau_us", emg.tau * 1e6}, {"clamped", emg.clamped}}},
      {"gaussian", {{"mean_us", m.m1 * 1e6}, {"std_us", sd * 1e6}}},
      {"exponential", {{"loc_us", lo * 1e6}, {"scale_us", (m.m1 - lo) * 1e6}}},
      {"loglik_per_frame", {{"emg", ll_emg / n}, {"gaussian", ll_gauss / n}, {"exponential", ll_exp / n}}},
      {"best", ll_emg >= ll_gauss && ll_emg >= ll_exp ? "emg" : (ll_gauss >= ll_exp ? "gaussian" : "exponential")}};

  if (!opt.out_dir.empty()) {
    std::ofstream csv(output_path(opt, "fitcheck.csv"));
    csv << "bin_center_us,density_per_us,emg_per_us,gaussian_per_us,exponential_per_us\n";
    char line[200];
    for (int b = 0; b < bins; ++b) {
      const double c = lo + (b + 0.5) * width;
      const double dens = static_cast<double>(counts[static_cast<std::size_t>(b)]) / (n * width);
      std::snprintf(line, sizeof line, "%.6f,%.9g,%.9g,%.9g,%.9g\n", c * 1e6, dens * 1e-6, emg_pdf(c, emg) * 1e-6,
                    gauss_pdf(c, m.m1, sd) * 1e-6, exp_pdf(c, lo, rate) * 1e-6);
      csv << line;
    }
    write_json(output_path(opt, "fitcheck.json"), summary);
  }
  return summary;
}

}  // namespace svguard::harness

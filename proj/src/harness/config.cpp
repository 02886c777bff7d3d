#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "svguard/harness.hpp"

namespace svguard::harness {

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string output_path(const RunOptions& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  return (std::filesystem::path(opt.out_dir) / name).string();
}

EngineConfig engine_config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  c.fs = j.value("fs", c.fs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.warmup_frames = j.value("warmup_frames", c.warmup_frames);
  c.flood_gate_sigmas = j.value("flood_gate_sigmas", c.flood_gate_sigmas);
  c.expiry_sigmas = j.value("expiry_sigmas", c.expiry_sigmas);
  c.latency_budget_s = j.value("latency_budget_ms", c.latency_budget_s * 1e3) * 1e-3;
  return c;
}

rnn::TrainConfig train_config_from_json(const nlohmann::json& j) {
  rnn::TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  const std::string opt = j.value("optimizer", std::string("sgd"));
  if (opt == "sgd")
    c.optimizer = rnn::Optimizer::Sgd;
  else if (opt == "adam")
    c.optimizer = rnn::Optimizer::Adam;
  else
    throw std::invalid_argument("unknown optimizer '" + opt + "'");
  c.momentum = j.value("momentum", c.momentum);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  return c;
}

}  // namespace svguard::harness

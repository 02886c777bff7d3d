#include "svguard/rnn_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace svguard::rnn {

namespace {

constexpr const char* kFormat = "svguard-rnn/1";

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("weight file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

CellKind cell_from(const std::string& s) {
  if (s == "lstm") return CellKind::Lstm;
  if (s == "elman") return CellKind::Elman;
  throw std::runtime_error("unknown cell kind '" + s + "'");
}

HeadKind head_from(const std::string& s) {
  if (s == "sigmoid") return HeadKind::Sigmoid;
  if (s == "softmax") return HeadKind::Softmax;
  throw std::runtime_error("unknown head kind '" + s + "'");
}

}  // namespace

nlohmann::json spec_to_json(const RnnSpec& s) {
  return {{"cell", to_string(s.cell)},       {"layers", s.num_layers}, {"hidden", s.hidden_size},
          {"input", s.input_size},           {"outputs", s.n_out},     {"head", to_string(s.head)}};
}

RnnSpec spec_from_json(const nlohmann::json& j) {
  RnnSpec s;
  s.cell = cell_from(j.at("cell").get<std::string>());
  s.num_layers = j.at("layers").get<int>();
  s.hidden_size = j.at("hidden").get<int>();
  s.input_size = j.at("input").get<int>();
  s.n_out = j.at("outputs").get<int>();
  s.head = head_from(j.at("head").get<std::string>());
  s.validate();
  return s;
}

nlohmann::json standardizer_to_json(const Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  if (s.mean.size() != s.scale.size()) throw std::runtime_error("standardizer mean/scale length mismatch");
  return s;
}

void save_model(std::ostream& out, const SavedModel& m) {
  const RnnSpec& spec = m.weights.spec;
  const Layout lay = layout(spec);
  if (m.weights.params.size() != lay.total) throw std::invalid_argument("weights do not match spec");

  const int H = spec.hidden_size;
  const int GH = spec.gates() * H;
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t l = 0; l < lay.layers.size(); ++l) {
    const auto& v = lay.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    blocks.push_back({{"name", p + "W"}, {"offset", v.w}, {"shape", {GH, v.in}}});
    blocks.push_back({{"name", p + "U"}, {"offset", v.u}, {"shape", {GH, H}}});
    blocks.push_back({{"name", p + "b"}, {"offset", v.b}, {"shape", {GH}}});
  }
  blocks.push_back({{"name", "head.W"}, {"offset", lay.head_w}, {"shape", {spec.n_out, H}}});
  blocks.push_back({{"name", "head.b"}, {"offset", lay.head_b}, {"shape", {spec.n_out}}});

  const nlohmann::json header = {{"format", kFormat}, {"spec", spec_to_json(spec)}, {"blocks", blocks},
                                 {"count", lay.total}, {"seed", m.seed},           {"extra", m.extra}};
  const std::string text = header.dump();
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : m.weights.params) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw std::runtime_error("failed writing weight file");
}

SavedModel load_model(std::istream& in) {
  const std::uint64_t len = get_u64(in);
  if (len > (std::uint64_t{1} << 30)) throw std::runtime_error("weight file header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("weight file truncated");
  const auto header = nlohmann::json::parse(text);
  if (header.value("format", "") != kFormat) throw std::runtime_error("not a weight file");

  SavedModel m;
  m.weights.spec = spec_from_json(header.at("spec"));
  m.seed = header.value("seed", std::uint64_t{0});
  if (header.contains("extra")) m.extra = header["extra"];
  const std::size_t count = header.at("count").get<std::size_t>();
  if (count != m.weights.spec.param_count()) throw std::runtime_error("parameter count does not match spec");
  m.weights.params.resize(count);
  for (auto& v : m.weights.params) v = std::bit_cast<double>(get_u64(in));
  return m;
}

void save_model_file(const std::string& path, const SavedModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_model(out, m);
}

SavedModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return load_model(in);
}

}  // namespace svguard::rnn

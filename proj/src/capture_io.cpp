#include "svguard/capture_io.hpp"

#include <json.hpp>

namespace svguard {

const char* to_string(Label label) {
  switch (label) {
    case Label::Legitimate: return "legit";
    case Label::Malicious: return "mal";
    case Label::Unknown: return "unk";
  }
  return "unk";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "legit") return Label::Legitimate;
  if (s == "mal") return Label::Malicious;
  if (s == "unk") return Label::Unknown;
  return std::nullopt;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(bytes.size() * 2, '0');
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[2 * i] = kDigits[bytes[i] >> 4];
    out[2 * i + 1] = kDigits[bytes[i] & 0x0F];
  }
  return out;
}

std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

void write_record(std::ostream& out, const TraceRecord& r) {
  out << "{\"t\":" << r.arrival_ns << ",\"port\":" << r.ingress_port << ",\"label\":\"" << to_string(r.label)
      << "\",\"raw\":\"" << r.frame_hex << "\"}\n";
}

void write_trace(std::span<const TraceRecord> records, std::ostream& out) {
  for (const auto& r : records) write_record(out, r);
  out.flush();
  if (!out) throw std::ios_base::failure("trace write failed");
}

std::optional<TraceRecord> TraceReader::next() {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (buf_.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(buf_);
    } catch (const nlohmann::json::parse_error& e) {
      throw TraceParseError(line_, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw TraceParseError(line_, "record is not an object");

    TraceRecord rec;
    auto t = j.find("t");
    if (t == j.end() || !t->is_number_integer()) throw TraceParseError(line_, "missing integer field \"t\"");
    rec.arrival_ns = t->get<std::int64_t>();
    auto port = j.find("port");
    if (port == j.end() || !port->is_number_integer())
      throw TraceParseError(line_, "missing integer field \"port\"");
    rec.ingress_port = port->get<std::int64_t>();
    auto label = j.find("label");
    if (label == j.end() || !label->is_string()) throw TraceParseError(line_, "missing string field \"label\"");
    auto parsed = parse_label(label->get<std::string>());
    if (!parsed) throw TraceParseError(line_, "unknown label \"" + label->get<std::string>() + "\"");
    rec.label = *parsed;
    auto raw = j.find("raw");
    if (raw == j.end() || !raw->is_string()) throw TraceParseError(line_, "missing string field \"raw\"");
    rec.frame_hex = raw->get<std::string>();
    if (!from_hex(rec.frame_hex)) throw TraceParseError(line_, "field \"raw\" is not valid hex");

    if (last_t_ && rec.arrival_ns < *last_t_) {
      if (out_of_order_ == 0) first_out_of_order_line_ = line_;
      ++out_of_order_;
    }
    last_t_ = rec.arrival_ns;
    return rec;
  }
  return std::nullopt;
}

ReadTraceResult read_trace(std::istream& in) {
  ReadTraceResult result;
  TraceReader reader(in);
  while (auto rec = reader.next()) result.records.push_back(std::move(*rec));
  if (reader.out_of_order() > 0) {
    result.warnings.push_back("timestamps not monotone: " + std::to_string(reader.out_of_order()) +
                              " record(s) out of order, first at line " +
                              std::to_string(reader.first_out_of_order_line()));
  }
  return result;
}

}  // namespace svguard

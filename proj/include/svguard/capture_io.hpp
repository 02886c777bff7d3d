#pragma once

// JSON-lines frame-arrival traces. One record per line, keys in fixed order:
//
//   {"t":<int ns>,"port":<int>,"label":"legit"|"mal"|"unk","raw":"<hex>"}
//
// Simulator output and converted captures share this format.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace svguard {

enum class Label : std::uint8_t { Legitimate, Malicious, Unknown };

const char* to_string(Label label);
std::optional<Label> parse_label(std::string_view s);

struct TraceRecord {
  std::int64_t arrival_ns = 0;
  std::int64_t ingress_port = 0;
  Label label = Label::Unknown;
  std::string frame_hex;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Returns nullopt on odd length or non-hex characters.
std::optional<std::vector<std::uint8_t>> from_hex(std::string_view hex);

/// Writes one line for `record`. Output is byte-stable for identical input.
void write_record(std::ostream& out, const TraceRecord& record);

/// Throws std::ios_base::failure if the stream reports an error.
void write_trace(std::span<const TraceRecord> records, std::ostream& out);

/// Pull-based reader; holds one line at a time.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in) : in_(in) {}

  /// Next record, or nullopt at end of input. Throws TraceParseError on a
  /// malformed line. Blank lines are skipped.
  std::optional<TraceRecord> next();

  std::size_t line_number() const { return line_; }
  /// Number of records whose timestamp was below the previous record's.
  std::size_t out_of_order() const { return out_of_order_; }
  /// Line of the first non-monotone record, 0 when none.
  std::size_t first_out_of_order_line() const { return first_out_of_order_line_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
  std::optional<std::int64_t> last_t_;
  std::size_t out_of_order_ = 0;
  std::size_t first_out_of_order_line_ = 0;
};

struct ReadTraceResult {
  std::vector<TraceRecord> records;
  std::vector<std::string> warnings;
};

ReadTraceResult read_trace(std::istream& in);

}  // namespace svguard

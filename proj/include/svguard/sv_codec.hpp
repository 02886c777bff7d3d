#pragma once

// Encoder/decoder for single-ASDU 9-2LE style Sampled Values Ethernet frames.
//
// Layout (all multi-byte integers big-endian):
//
//   dst MAC (6) | src MAC (6) | [802.1Q 0x8100 + TCI (4), decode only]
//   Ethertype 0x88BA (2) | APPID (2) | Length (2) | Reserved1 (2) | Reserved2 (2)
//   savPdu      60 L
//     noASDU    80 01 01
//     seqOfASDU A2 L
//       ASDU    30 L
//         svID      80 n  <ascii>
//         smpCnt    82 02 <u16>
//         confRev   83 04 <u32>
//         smpSynch  85 01 <u8>
//         seqOfData 87 40 8 x (int32 value, uint32 quality)
//
// Length counts from APPID to the end of the APDU. The decoder also skips the
// optional 9-2 ASDU members datSet (81), refrTm (84), smpRate (86) and
// smpMod (88) when present.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace svguard {

inline constexpr std::uint16_t kSvEthertype = 0x88BA;
inline constexpr std::uint16_t kVlanEthertype = 0x8100;
inline constexpr std::size_t kMaxSvIdLength = 34;
inline constexpr std::size_t kSampleCount = 8;

using MacAddress = std::array<std::uint8_t, 6>;

struct SamplePair {
  std::int32_t value = 0;
  std::uint32_t quality = 0;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

struct SvFrame {
  MacAddress dst_mac{};
  MacAddress src_mac{};
  std::uint16_t app_id = 0x4000;
  std::string sv_id;
  std::uint16_t smp_cnt = 0;
  std::uint32_t conf_rev = 1;
  std::uint8_t smp_synch = 2;
  std::array<SamplePair, kSampleCount> samples{};
  // Bytes the frame was decoded from; empty for frames built in memory.
  // Not part of frame identity.
  std::vector<std::uint8_t> raw;

  friend bool operator==(const SvFrame& a, const SvFrame& b) {
    return a.dst_mac == b.dst_mac && a.src_mac == b.src_mac && a.app_id == b.app_id &&
           a.sv_id == b.sv_id && a.smp_cnt == b.smp_cnt && a.conf_rev == b.conf_rev &&
           a.smp_synch == b.smp_synch && a.samples == b.samples;
  }
};

struct ArrivedFrame {
  SvFrame frame;
  std::int64_t arrival_ns = 0;
  std::uint16_t ingress_port = 0;
};

enum class DecodeErrorKind {
  NotSampledValues,   // Ethertype is not 0x88BA
  Truncated,          // input ends inside a header or TLV
  UnexpectedTag,      // a mandatory TLV carries the wrong tag
  LengthOverflow,     // a declared length exceeds its enclosing container
  BadFieldLength,     // fixed-size member with the wrong length
  UnsupportedAsduCount,
  UnsupportedLengthForm,  // indefinite or >2 byte BER length
};

const char* to_string(DecodeErrorKind kind);

struct DecodeError {
  DecodeErrorKind kind;
  std::size_t offset = 0;  // byte offset of the offending header/TLV
  std::uint8_t tag = 0;    // TLV tag involved, 0 when not applicable
  std::string message;
};

class EncodeError : public std::exception {
 public:
  explicit EncodeError(std::string what) : what_(std::move(what)) {}
  const char* what() const noexcept override { return what_.c_str(); }

 private:
  std::string what_;
};

using DecodeResult = std::variant<SvFrame, DecodeError>;

/// Serializes `frame` into the fixed single-ASDU layout. Throws EncodeError
/// when `sv_id` is longer than kMaxSvIdLength.
std::vector<std::uint8_t> encode(const SvFrame& frame);

/// Parses a frame. Never reads past `bytes`; every malformed input yields a
/// DecodeError instead of throwing.
DecodeResult decode(std::span<const std::uint8_t> bytes);

inline bool ok(const DecodeResult& r) { return std::holds_alternative<SvFrame>(r); }

}  // namespace svguard

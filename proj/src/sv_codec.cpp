#include "svguard/sv_codec.hpp"

#include <optional>

namespace svguard {

namespace {

constexpr std::uint8_t kTagSavPdu = 0x60;
constexpr std::uint8_t kTagNoAsdu = 0x80;
constexpr std::uint8_t kTagSeqOfAsdu = 0xA2;
constexpr std::uint8_t kTagAsdu = 0x30;
constexpr std::uint8_t kTagSvId = 0x80;
constexpr std::uint8_t kTagDatSet = 0x81;
constexpr std::uint8_t kTagSmpCnt = 0x82;
constexpr std::uint8_t kTagConfRev = 0x83;
constexpr std::uint8_t kTagRefrTm = 0x84;
constexpr std::uint8_t kTagSmpSynch = 0x85;
constexpr std::uint8_t kTagSmpRate = 0x86;
constexpr std::uint8_t kTagSeqOfData = 0x87;
constexpr std::uint8_t kTagSmpMod = 0x88;

constexpr std::size_t kSeqOfDataLength = kSampleCount * 8;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_tl(std::vector<std::uint8_t>& out, std::uint8_t tag, std::size_t len) {
  out.push_back(tag);
  // Every container of the single-ASDU profile stays below 128 bytes.
  out.push_back(static_cast<std::uint8_t>(len));
}

// Bounded cursor over the input. All reads check against `end_`, which may be
// tightened to the extent of an enclosing TLV.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes), end_(bytes.size()) {}

  std::size_t pos() const { return pos_; }
  std::size_t end() const { return end_; }
  std::size_t remaining() const { return end_ - pos_; }
  void set_end(std::size_t e) { end_ = e; }
  void skip(std::size_t n) { pos_ += n; }

  bool u8(std::uint8_t& v) {
    if (remaining() < 1) return false;
    v = bytes_[pos_++];
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (remaining() < 2) return false;
    v = static_cast<std::uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
    pos_ += 2;
    return true;
  }
  bool u32(std::uint32_t& v) {
    if (remaining() < 4) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return true;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t end_;
};

struct Tlv {
  std::uint8_t tag;
  std::size_t offset;  // offset of the tag byte
  std::size_t length;  // value length
};

DecodeError make_error(DecodeErrorKind kind, std::size_t offset, std::uint8_t tag, std::string msg) {
  return DecodeError{kind, offset, tag, std::move(msg)};
}

// Reads a tag and a definite BER length (short form, 0x81 or 0x82 long
// form), and checks that the value fits inside the reader's current extent.
std::variant<Tlv, DecodeError> read_tl(Reader& r) {
  const std::size_t start = r.pos();
  std::uint8_t tag = 0;
  if (!r.u8(tag)) return make_error(DecodeErrorKind::Truncated, start, 0, "missing TLV tag");
  std::uint8_t first = 0;
  if (!r.u8(first)) return make_error(DecodeErrorKind::Truncated, start, tag, "missing TLV length");
  std::size_t len = first;
  if (first & 0x80) {
    const std::size_t n = first & 0x7F;
    if (n == 0 || n > 2)
      return make_error(DecodeErrorKind::UnsupportedLengthForm, start, tag, "unsupported BER length form");
    len = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint8_t b = 0;
      if (!r.u8(b)) return make_error(DecodeErrorKind::Truncated, start, tag, "truncated BER length");
      len = (len << 8) | b;
    }
  }
  if (len > r.remaining())
    return make_error(DecodeErrorKind::LengthOverflow, start, tag,
                      "TLV length " + std::to_string(len) + " exceeds " + std::to_string(r.remaining()) +
                          " available bytes");
  return Tlv{tag, start, len};
}

std::optional<DecodeError> expect_tag(const Tlv& tlv, std::uint8_t tag, const char* what) {
  if (tlv.tag == tag) return std::nullopt;
  return make_error(DecodeErrorKind::UnexpectedTag, tlv.offset, tlv.tag,
                    std::string("expected ") + what + " tag");
}

std::optional<DecodeError> expect_len(const Tlv& tlv, std::size_t len, const char* what) {
  if (tlv.length == len) return std::nullopt;
  return make_error(DecodeErrorKind::BadFieldLength, tlv.offset, tlv.tag,
                    std::string(what) + " must be " + std::to_string(len) + " bytes");
}

bool is_optional_asdu_member(std::uint8_t tag) {
  return tag == kTagDatSet || tag == kTagRefrTm || tag == kTagSmpRate || tag == kTagSmpMod;
}

}  // namespace

const char* to_string(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::NotSampledValues: return "not an SV frame";
    case DecodeErrorKind::Truncated: return "truncated";
    case DecodeErrorKind::UnexpectedTag: return "unexpected tag";
    case DecodeErrorKind::LengthOverflow: return "length overflow";
    case DecodeErrorKind::BadFieldLength: return "bad field length";
    case DecodeErrorKind::UnsupportedAsduCount: return "unsupported noASDU";
    case DecodeErrorKind::UnsupportedLengthForm: return "unsupported length form";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode(const SvFrame& frame) {
  if (frame.sv_id.size() > kMaxSvIdLength)
    throw EncodeError("svID of " + std::to_string(frame.sv_id.size()) + " bytes exceeds " +
                      std::to_string(kMaxSvIdLength));

  const std::size_t asdu_len = (2 + frame.sv_id.size()) + 4 + 6 + 3 + (2 + kSeqOfDataLength);
  const std::size_t seq_len = 2 + asdu_len;
  const std::size_t pdu_len = 3 + 2 + seq_len;
  const std::size_t length_field = 8 + 2 + pdu_len;

  std::vector<std::uint8_t> out;
  out.reserve(14 + length_field);
  out.insert(out.end(), frame.dst_mac.begin(), frame.dst_mac.end());
  out.insert(out.end(), frame.src_mac.begin(), frame.src_mac.end());
  put_u16(out, kSvEthertype);
  put_u16(out, frame.app_id);
  put_u16(out, static_cast<std::uint16_t>(length_field));
  put_u16(out, 0);
  put_u16(out, 0);

  put_tl(out, kTagSavPdu, pdu_len);
  put_tl(out, kTagNoAsdu, 1);
  out.push_back(1);
  put_tl(out, kTagSeqOfAsdu, seq_len);
  put_tl(out, kTagAsdu, asdu_len);
  put_tl(out, kTagSvId, frame.sv_id.size());
  out.insert(out.end(), frame.sv_id.begin(), frame.sv_id.end());
  put_tl(out, kTagSmpCnt, 2);
  put_u16(out, frame.smp_cnt);
  put_tl(out, kTagConfRev, 4);
  put_u32(out, frame.conf_rev);
  put_tl(out, kTagSmpSynch, 1);
  out.push_back(frame.smp_synch);
  put_tl(out, kTagSeqOfData, kSeqOfDataLength);
  for (const auto& s : frame.samples) {
    put_u32(out, static_cast<std::uint32_t>(s.value));
    put_u32(out, s.quality);
  }
  return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  SvFrame f;

  if (r.remaining() < 14) return make_error(DecodeErrorKind::Truncated, 0, 0, "shorter than Ethernet header");
  auto dst = r.take(6);
  auto src = r.take(6);
  std::copy(dst.begin(), dst.end(), f.dst_mac.begin());
  std::copy(src.begin(), src.end(), f.src_mac.begin());

  std::uint16_t ethertype = 0;
  std::size_t ethertype_at = r.pos();
  r.u16(ethertype);
  if (ethertype == kVlanEthertype) {
    std::uint16_t tci = 0;
    ethertype_at = r.pos() + 2;
    if (!r.u16(tci) || !r.u16(ethertype))
      return make_error(DecodeErrorKind::Truncated, 12, 0, "truncated 802.1Q tag");
  }
  if (ethertype != kSvEthertype)
    return make_error(DecodeErrorKind::NotSampledValues, ethertype_at, 0, "not an SV frame");

  const std::size_t header_at = r.pos();
  std::uint16_t length = 0, reserved1 = 0, reserved2 = 0;
  if (!r.u16(f.app_id) || !r.u16(length) || !r.u16(reserved1) || !r.u16(reserved2))
    return make_error(DecodeErrorKind::Truncated, header_at, 0, "truncated SV header");
  if (length < 8)
    return make_error(DecodeErrorKind::BadFieldLength, header_at + 2, 0, "Length field below header size");
  if (header_at + length > bytes.size())
    return make_error(DecodeErrorKind::LengthOverflow, header_at + 2, 0,
                      "Length field " + std::to_string(length) + " exceeds frame");
  r.set_end(header_at + length);

  auto pdu = read_tl(r);
  if (auto* e = std::get_if<DecodeError>(&pdu)) return *e;
  const Tlv pdu_tlv = std::get<Tlv>(pdu);
  if (auto e = expect_tag(pdu_tlv, kTagSavPdu, "savPdu")) return *e;
  r.set_end(r.pos() + pdu_tlv.length);

  auto no_asdu = read_tl(r);
  if (auto* e = std::get_if<DecodeError>(&no_asdu)) return *e;
  const Tlv no_asdu_tlv = std::get<Tlv>(no_asdu);
  if (auto e = expect_tag(no_asdu_tlv, kTagNoAsdu, "noASDU")) return *e;
  if (auto e = expect_len(no_asdu_tlv, 1, "noASDU")) return *e;
  std::uint8_t count = 0;
  r.u8(count);
  if (count != 1)
    return make_error(DecodeErrorKind::UnsupportedAsduCount, no_asdu_tlv.offset, kTagNoAsdu,
                      "noASDU " + std::to_string(count) + " not supported");

  auto seq = read_tl(r);
  if (auto* e = std::get_if<DecodeError>(&seq)) return *e;
  const Tlv seq_tlv = std::get<Tlv>(seq);
  if (auto e = expect_tag(seq_tlv, kTagSeqOfAsdu, "seqOfASDU")) return *e;
  r.set_end(r.pos() + seq_tlv.length);

  auto asdu = read_tl(r);
  if (auto* e = std::get_if<DecodeError>(&asdu)) return *e;
  const Tlv asdu_tlv = std::get<Tlv>(asdu);
  if (auto e = expect_tag(asdu_tlv, kTagAsdu, "ASDU")) return *e;
  r.set_end(r.pos() + asdu_tlv.length);

  // Reads the next mandatory member, skipping optional 9-2 members.
  auto next_member = [&r]() -> std::variant<Tlv, DecodeError> {
    for (;;) {
      auto tl = read_tl(r);
      if (std::holds_alternative<DecodeError>(tl)) return tl;
      const Tlv t = std::get<Tlv>(tl);
      if (!is_optional_asdu_member(t.tag)) return t;
      r.skip(t.length);
    }
  };

  auto sv_id = next_member();
  if (auto* e = std::get_if<DecodeError>(&sv_id)) return *e;
  const Tlv sv_id_tlv = std::get<Tlv>(sv_id);
  if (auto e = expect_tag(sv_id_tlv, kTagSvId, "svID")) return *e;
  if (sv_id_tlv.length > kMaxSvIdLength)
    return make_error(DecodeErrorKind::BadFieldLength, sv_id_tlv.offset, kTagSvId, "svID longer than 34 bytes");
  auto id = r.take(sv_id_tlv.length);
  f.sv_id.assign(id.begin(), id.end());

  auto smp_cnt = next_member();
  if (auto* e = std::get_if<DecodeError>(&smp_cnt)) return *e;
  if (auto e = expect_tag(std::get<Tlv>(smp_cnt), kTagSmpCnt, "smpCnt")) return *e;
  if (auto e = expect_len(std::get<Tlv>(smp_cnt), 2, "smpCnt")) return *e;
  r.u16(f.smp_cnt);

  auto conf_rev = next_member();
  if (auto* e = std::get_if<DecodeError>(&conf_rev)) return *e;
  if (auto e = expect_tag(std::get<Tlv>(conf_rev), kTagConfRev, "confRev")) return *e;
  if (auto e = expect_len(std::get<Tlv>(conf_rev), 4, "confRev")) return *e;
  r.u32(f.conf_rev);

  auto synch = next_member();
  if (auto* e = std::get_if<DecodeError>(&synch)) return *e;
  if (auto e = expect_tag(std::get<Tlv>(synch), kTagSmpSynch, "smpSynch")) return *e;
  if (auto e = expect_len(std::get<Tlv>(synch), 1, "smpSynch")) return *e;
  r.u8(f.smp_synch);

  auto data = next_member();
  if (auto* e = std::get_if<DecodeError>(&data)) return *e;
  if (auto e = expect_tag(std::get<Tlv>(data), kTagSeqOfData, "seqOfData")) return *e;
  if (auto e = expect_len(std::get<Tlv>(data), kSeqOfDataLength, "seqOfData")) return *e;
  for (auto& s : f.samples) {
    std::uint32_t v = 0;
    r.u32(v);
    s.value = static_cast<std::int32_t>(v);
    r.u32(s.quality);
  }

  f.raw.assign(bytes.begin(), bytes.end());
  return f;
}

}  // namespace svguard

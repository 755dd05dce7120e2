#pragma once

// SKB1 binary sketch format.
//
//   "SKB1" | u64 m | u64 n | u64 s | u8 tag | m x f64 row scale   (header)
//   per row: varint entry count, then per entry
//            varint column gap, zigzag varint count [, f64 value]  (payload)
//   u64 CRC-64/XZ of header and payload                          (trailer)
//
// All fixed-width fields are little-endian. The first column of a row is
// stored as is and later ones as col - prev - 1. The tag is the scheme id with
// bit 7 set when entries carry explicit f64 values.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "sketchstream/sketch.hpp"

namespace sketchstream {

inline constexpr unsigned char kSkb1Magic[4] = {0x53, 0x4B, 0x42, 0x31};
inline constexpr std::uint8_t kExplicitValueFlag = 0x80;

using Crc64 = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ull, ~0ull, ~0ull, true, true>;

inline std::uint64_t crc64(std::span<const unsigned char> bytes) {
  Crc64 crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace varint {

inline void put(std::vector<unsigned char>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<unsigned char>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<unsigned char>(v));
}

inline std::size_t size(std::uint64_t v) {
  std::size_t n = 1;
  while (v >= 0x80) v >>= 7, ++n;
  return n;
}

inline constexpr std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

inline constexpr std::int64_t unzigzag(std::uint64_t u) {
  return static_cast<std::int64_t>(u >> 1) ^ -static_cast<std::int64_t>(u & 1);
}

}  // namespace varint

struct EncodedSketch {
  std::vector<unsigned char> bytes;
  std::size_t header_bytes = 0;
  std::size_t payload_bytes = 0;
  std::uint64_t s = 0;

  double bits_per_sample() const { return s == 0 ? 0.0 : 8.0 * static_cast<double>(payload_bytes) / static_cast<double>(s); }
};

namespace detail {

inline void put_f64_le(std::vector<unsigned char>& out, double v) {
  unsigned char b[8];
  put_u64_le(b, std::bit_cast<std::uint64_t>(v));
  out.insert(out.end(), b, b + 8);
}

inline void put_u64_le(std::vector<unsigned char>& out, std::uint64_t v) {
  unsigned char b[8];
  put_u64_le(b, v);
  out.insert(out.end(), b, b + 8);
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw DecodeError(pos_, std::string("truncated ") + what);
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    const std::uint64_t v = get_u64_le(bytes_.data() + pos_);
    pos_ += 8;
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }

  std::uint64_t var(const char* what) {
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= bytes_.size()) throw DecodeError(start, std::string("truncated varint in ") + what);
      const unsigned char b = bytes_[pos_++];
      if (shift == 63 && (b & 0x7E)) throw DecodeError(start, std::string("varint overflow in ") + what);
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if (!(b & 0x80)) return v;
    }
    throw DecodeError(start, std::string("varint longer than 10 bytes in ") + what);
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline EncodedSketch encode_sketch(const SketchMatrix& B) {
  B.validate();
  EncodedSketch out;
  auto& v = out.bytes;
  v.insert(v.end(), kSkb1Magic, kSkb1Magic + 4);
  detail::put_u64_le(v, B.dims.m);
  detail::put_u64_le(v, B.dims.n);
  detail::put_u64_le(v, B.s);
  v.push_back(static_cast<std::uint8_t>(static_cast<std::uint8_t>(B.scheme) | (B.explicit_values ? kExplicitValueFlag : 0)));
  for (double r : B.row_scale) detail::put_f64_le(v, r);
  out.header_bytes = v.size();

  std::size_t t = 0;
  for (std::uint64_t i = 0; i < B.dims.m; ++i) {
    std::size_t end = t;
    while (end < B.entries.size() && B.entries[end].row == i) ++end;
    varint::put(v, end - t);
    std::uint64_t prev = 0;
    for (std::size_t q = t; q < end; ++q) {
      const auto& e = B.entries[q];
      varint::put(v, q == t ? e.col : e.col - prev - 1);
      varint::put(v, varint::zigzag(e.count));
      if (B.explicit_values) detail::put_f64_le(v, e.value);
      prev = e.col;
    }
    t = end;
  }
  out.payload_bytes = v.size() - out.header_bytes;
  detail::put_u64_le(v, crc64(v));
  out.s = B.s;
  return out;
}

inline SketchMatrix decode_sketch(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSkb1Magic, 4) != 0) throw DecodeError(0, "bad magic, expected SKB1");
  if (bytes.size() < 4 + 3 * 8 + 1 + 8) throw DecodeError(bytes.size(), "truncated header");
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t stored = detail::get_u64_le(bytes.data() + body);
  if (crc64(bytes.first(body)) != stored) throw DecodeError(body, "checksum mismatch");

  detail::Reader h(bytes.first(body));
  for (int b = 0; b < 4; ++b) (void)h.u8("magic");

  SketchMatrix B;
  B.dims.m = h.u64("m");
  B.dims.n = h.u64("n");
  B.s = h.u64("s");
  const std::size_t tag_pos = h.pos();
  const std::uint8_t tag = h.u8("scheme tag");
  const std::uint8_t id = tag & static_cast<std::uint8_t>(~kExplicitValueFlag);
  if (id > static_cast<std::uint8_t>(Scheme::l2_trim)) throw DecodeError(tag_pos, "unknown scheme tag");
  B.scheme = static_cast<Scheme>(id);
  B.explicit_values = (tag & kExplicitValueFlag) != 0;
  if (B.dims.m == 0 || B.dims.n == 0) throw DecodeError(4, "zero dimension");
  if (B.dims.m > (body - h.pos()) / 8) throw DecodeError(h.pos(), "row scale table exceeds the file");
  B.row_scale.resize(B.dims.m);
  for (auto& x : B.row_scale) x = h.f64("row scale");

  std::uint64_t counted = 0;
  for (std::uint64_t i = 0; i < B.dims.m; ++i) {
    const std::size_t at = h.pos();
    const std::uint64_t len = h.var("row length");
    if (len > B.dims.n || len > body - h.pos()) throw DecodeError(at, "row length exceeds bounds");
    std::uint64_t col = 0;
    for (std::uint64_t q = 0; q < len; ++q) {
      const std::size_t ep = h.pos();
      const std::uint64_t gap = h.var("column gap");
      col = q == 0 ? gap : col + gap + 1;
      if (col >= B.dims.n || (q > 0 && gap >= B.dims.n)) throw DecodeError(ep, "column outside the matrix");
      const std::int64_t k = varint::unzigzag(h.var("count"));
      if (k == 0) throw DecodeError(ep, "zero count");
      if (k == INT64_MIN) throw DecodeError(ep, "count out of range");
      const std::uint64_t ak = static_cast<std::uint64_t>(k < 0 ? -k : k);
      if (ak > B.s - counted) throw DecodeError(ep, "counts exceed the sample budget");
      counted += ak;
      SketchEntry e{i, col, k, 0.0};
      if (B.explicit_values) e.value = h.f64("entry value");
      B.entries.push_back(e);
    }
  }
  if (h.pos() != body) throw DecodeError(h.pos(), "trailing bytes after payload");
  try {
    B.validate();
  } catch (const Error& e) {
    throw DecodeError(body, e.what());
  }
  return B;
}

}  // namespace sketchstream

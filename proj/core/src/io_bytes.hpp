#pragma once

// Internal little-endian byte (de)serialization used by the binary file
// formats. Explicit byte order so files are portable across hosts.

#include <bit>
#include <cstdint>
#include <string>

#include "e4g/errors.hpp"

namespace e4g::detail {

inline void put_u8(std::string& out, uint8_t v) { out.push_back(char(v)); }

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<uint32_t>(v));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  uint8_t u8() {
    need(1);
    return uint8_t(buf_[pos_++]);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= uint16_t(uint8_t(buf_[pos_++])) << (8 * i);
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf_[pos_++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool exhausted() const { return pos_ == buf_.size(); }

  void need(size_t n) const {
    if (pos_ + n > buf_.size()) throw IoError(what_ + ": truncated file");
  }

 private:
  const std::string& buf_;
  std::string what_;
  size_t pos_ = 0;
};

}  // namespace e4g::detail

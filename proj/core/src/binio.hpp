// SPDX-License-Identifier: Apache-2.0
// Internal little-endian binary stream helpers (not installed).
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "diffseg/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

namespace diffseg::binio {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_bytes(os, &v, 8); }
inline void write_f64(std::ostream& os, double v) { write_bytes(os, &v, 8); }
inline void write_f32(std::ostream& os, float v) { write_bytes(os, &v, 4); }

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

/// Reader that tracks the byte offset for parse diagnostics.
class Reader {
 public:
  Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  std::size_t offset() const { return offset_; }

  void read_bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw ParseError(context_ + ": truncated (wanted " + std::to_string(n) + " bytes)", offset_);
    offset_ += n;
  }

  std::uint32_t read_u32() {
    std::uint32_t v;
    read_bytes(&v, 4);
    return v;
  }
  std::uint64_t read_u64() {
    std::uint64_t v;
    read_bytes(&v, 8);
    return v;
  }
  double read_f64() {
    double v;
    read_bytes(&v, 8);
    return v;
  }
  float read_f32() {
    float v;
    read_bytes(&v, 4);
    return v;
  }
  std::string read_string(std::size_t max_len = 1 << 20) {
    const std::uint32_t n = read_u32();
    if (n > max_len) throw ParseError(context_ + ": implausible string length", offset_ - 4);
    std::string s(n, '\0');
    if (n) read_bytes(s.data(), n);
    return s;
  }
  void expect_magic(const char magic[4]) {
    char buf[4];
    read_bytes(buf, 4);
    if (std::memcmp(buf, magic, 4) != 0)
      throw ParseError(context_ + ": bad magic, expected '" + std::string(magic, 4) + "'",
                       offset_ - 4);
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(context_ + ": " + msg, offset_); }

 private:
  std::istream& is_;
  std::string context_;
  std::size_t offset_ = 0;
};

}  // namespace diffseg::binio

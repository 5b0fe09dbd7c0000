#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "mlkrig/error.hpp"

namespace mlkrig::io {

// Fixed-width little-endian encoding regardless of host byte order.
class BinaryWriter {
public:
  explicit BinaryWriter(const std::string &path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_)
      throw ConfigError("cannot open '" + path + "' for writing");
  }
  void bytes(const char *p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { put(v); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void close() {
    out_.close();
    if (!out_)
      throw ConfigError("write failed for '" + path_ + "'");
  }

private:
  template <class U> void put(U v) {
    char buf[sizeof(U)];
    for (std::size_t k = 0; k < sizeof(U); ++k)
      buf[k] = static_cast<char>((v >> (8 * k)) & 0xff);
    out_.write(buf, sizeof(U));
  }
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
public:
  explicit BinaryReader(const std::string &path) : in_(path, std::ios::binary) {
    if (!in_)
      throw ConfigError("cannot open '" + path + "' for reading");
  }
  void bytes(char *p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_)
      throw ConfigError("unexpected end of binary file");
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  std::int64_t i64() { return static_cast<std::int64_t>(get<std::uint64_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

private:
  template <class U> U get() {
    unsigned char buf[sizeof(U)];
    bytes(reinterpret_cast<char *>(buf), sizeof(U));
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k)
      v |= static_cast<U>(buf[k]) << (8 * k);
    return v;
  }
  std::ifstream in_;
};

} // namespace mlkrig::io

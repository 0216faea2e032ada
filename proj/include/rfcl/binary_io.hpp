#pragma once

// Little-endian primitives for the weight and state files.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rfcl/common.hpp"

namespace rfcl::binary {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(buf, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(buf, 4);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_f64s(std::ostream& os, std::span<const double> vs) {
  for (double v : vs) put_f64(os, v);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw Error("unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) throw Error("unexpected end of file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::vector<double> get_f64s(std::istream& is, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = get_f64(is);
  return out;
}

inline void put_magic(std::ostream& os, const std::string& magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, const std::string& magic) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw Error("bad magic: expected '" + magic.substr(0, magic.find('\0')) + "'");
  }
}

}  // namespace rfcl::binary

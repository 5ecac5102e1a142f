#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace hpinn::binio {

// Explicit little-endian encoding, independent of host byte order.

inline void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

template <typename U>
void put_le(std::ostream& os, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

inline void expect_good(std::istream& is, const char* what) {
  if (!is) throw std::runtime_error(std::string("truncated input while reading ") + what);
}

template <typename U>
U get_le(std::istream& is, const char* what) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int c = is.get();
    expect_good(is, what);
    v |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline std::uint8_t get_u8(std::istream& is, const char* what) { return get_le<std::uint8_t>(is, what); }
inline std::uint32_t get_u32(std::istream& is, const char* what) { return get_le<std::uint32_t>(is, what); }
inline std::uint64_t get_u64(std::istream& is, const char* what) { return get_le<std::uint64_t>(is, what); }
inline double get_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(get_le<std::uint64_t>(is, what));
}

inline void put_magic(std::ostream& os, const char (&magic)[9]) { os.write(magic, 8); }

inline void expect_magic(std::istream& is, const char (&magic)[9], const char* what) {
  char buf[8];
  is.read(buf, 8);
  expect_good(is, what);
  if (std::memcmp(buf, magic, 8) != 0) throw std::runtime_error(std::string("bad magic in ") + what);
}

}  // namespace hpinn::binio

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

namespace g2l::detail {

template <class T>
T byteswap_if_big(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <class T>
void write_le(std::ostream& os, T value) {
  value = byteswap_if_big(value);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
bool read_le(std::istream& is, T& value) {
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) return false;
  value = byteswap_if_big(value);
  return true;
}

inline void write_floats(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) write_le(os, f);
  }
}

inline bool read_floats(std::istream& is, std::span<float> values) {
  if (!is.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size_bytes())))
    return false;
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : values) f = byteswap_if_big(f);
  }
  return true;
}

}  // namespace g2l::detail

#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "rosanna/common.hpp"

namespace rosanna::io {

// Little-endian stream primitives for the index file format.

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw IoError("index file truncated");
  return value;
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& in, std::vector<T>& v, size_t count) {
  v.resize(count);
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(count * sizeof(T))))
    throw IoError("index file truncated");
}

inline void write_bytes(std::ostream& out, const std::string& s) {
  write_pod<uint16_t>(out, static_cast<uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_bytes(std::istream& in) {
  uint16_t len = read_pod<uint16_t>(in);
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw IoError("index file truncated");
  return s;
}

}  // namespace rosanna::io

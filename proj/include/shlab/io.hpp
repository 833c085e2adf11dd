#ifndef SHLAB_IO_HPP
#define SHLAB_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "shlab/grid.hpp"

namespace shlab {

// Snapshot layout (little-endian):
//   "SHM1" | u32 n_points | f64 length | u8 is_complex | values
// values are n f64 for real fields, 2n f64 (re, im interleaved) for complex.

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("snapshot: truncated file");
  return v;
}

inline void write_header(std::ostream& os, const Grid& g, bool is_complex) {
  os.write("SHM1", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.size()));
  put<double>(os, g.length());
  put<std::uint8_t>(os, is_complex ? 1 : 0);
}

}  // namespace detail

inline void write_field(std::ostream& os, const RealField& f) {
  detail::write_header(os, f.grid, false);
  os.write(reinterpret_cast<const char*>(f.values.data()),
           static_cast<std::streamsize>(sizeof(double) * f.size()));
}

inline void write_field(std::ostream& os, const ComplexField& f) {
  detail::write_header(os, f.grid, true);
  os.write(reinterpret_cast<const char*>(f.values.data()),
           static_cast<std::streamsize>(sizeof(cplx) * f.size()));
}

template <class Field>
void write_field(const std::string& path, const Field& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_field(os, f);
  if (!os) throw std::runtime_error("write failed: " + path);
}

using AnyField = std::variant<RealField, ComplexField>;

inline AnyField read_field(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SHM1", 4) != 0) throw std::runtime_error("snapshot: bad magic");
  const auto n = detail::get<std::uint32_t>(is);
  const auto length = detail::get<double>(is);
  const auto is_complex = detail::get<std::uint8_t>(is);
  const Grid g(n, length);
  if (is_complex) {
    ComplexField f(g);
    is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(sizeof(cplx) * n));
    if (!is) throw std::runtime_error("snapshot: truncated file");
    return f;
  }
  RealField f(g);
  is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(sizeof(double) * n));
  if (!is) throw std::runtime_error("snapshot: truncated file");
  return f;
}

inline AnyField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_field(is);
}

}  // namespace shlab

#endif

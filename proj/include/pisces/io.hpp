// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary helpers and the CSV matrix format.

#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pisces/numerics.hpp"

namespace pisces::io {

class ByteWriter {
 public:
  void raw(std::string_view s) { buf_.append(s); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  const std::string& bytes() const { return buf_; }

 private:
  template <class T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}

  std::string raw(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::vector<double> f64s(std::size_t n) {
    need_items(n, 8);
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void need_items(std::uint64_t count, std::uint64_t item_size) const {
    if (item_size != 0 && count > remaining() / item_size)
      throw Error(ErrorKind::data, "truncated", "file ends before declared payload");
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw Error(ErrorKind::data, "truncated", "unexpected end of file");
  }
  template <class T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data, "io-error", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::data, "io-error", "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::data, "io-error", "short write to " + path);
}

// Shortest text that round-trips is not required; 17 significant digits is.
inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string mat_to_csv(const Mat& m) {
  std::string s;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) s.push_back(',');
      s += format_double(m(i, j));
    }
    s.push_back('\n');
  }
  return s;
}

inline Mat mat_from_csv(std::string_view text) {
  Mat m;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    std::size_t cols = 0;
    while (true) {
      const std::size_t comma = line.find(',');
      std::string cell(line.substr(0, comma));
      const auto b = cell.find_first_not_of(" \t"), e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
        throw Error(ErrorKind::data, "malformed-csv", "bad number '" + cell + "' on line " + std::to_string(line_no));
      m.data.push_back(v);
      ++cols;
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (m.rows == 0) m.cols = cols;
    if (cols != m.cols) throw Error(ErrorKind::data, "malformed-csv", "ragged row on line " + std::to_string(line_no));
    ++m.rows;
  }
  if (m.rows == 0) throw Error(ErrorKind::data, "malformed-csv", "no rows");
  return m;
}

}  // namespace pisces::io

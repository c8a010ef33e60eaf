#pragma once

// Matrix files. Two formats, both with one sample per row:
//   CSV     - comma separated, optional non-numeric header row.
//   binary  - "GUMM", u32 rows, u32 cols (little endian), then rows*cols f64
//             little-endian values in row-major order.

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gul/error.hpp"

namespace gul::io {

using Eigen::Index;
using Eigen::MatrixXd;

inline constexpr std::array<char, 4> kMagic = {'G', 'U', 'M', 'M'};

namespace detail {

inline std::uint32_t load_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void store_u32(std::uint32_t v, char* out) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
}

inline double load_f64(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
  return std::bit_cast<double>(bits);
}

inline void store_f64(double v, char* out) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
}

inline bool parse_double(const std::string& field, double& out) {
  std::size_t b = field.find_first_not_of(" \t\r");
  std::size_t e = field.find_last_not_of(" \t\r");
  if (b == std::string::npos) return false;
  const std::string trimmed = field.substr(b, e - b + 1);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(trimmed.c_str(), &end);
  return end == trimmed.c_str() + trimmed.size() && errno != ERANGE;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

inline MatrixXd read_binary(std::istream& in, const std::string& name) {
  unsigned char header[12];
  in.read(reinterpret_cast<char*>(header), 12);
  require(in.gcount() == 12, ErrorKind::Parse, name + ": truncated header (offset 0)");
  require(std::memcmp(header, kMagic.data(), 4) == 0, ErrorKind::Parse, name + ": bad magic at offset 0");
  const std::uint32_t rows = detail::load_u32(header + 4);
  const std::uint32_t cols = detail::load_u32(header + 8);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> payload(count * 8);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    fail(ErrorKind::Parse, name + ": expected " + std::to_string(payload.size()) +
                               " payload bytes after offset 12, got " + std::to_string(in.gcount()));
  }
  MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      m(r, c) = detail::load_f64(payload.data() + 8 * (static_cast<std::size_t>(r) * cols + c));
    }
  }
  return m;
}

inline MatrixXd read_csv(std::istream& in, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = detail::split_csv(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!detail::parse_double(fields[i], values[i])) {
        numeric = false;
        bad = i;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {  // header row
        width = fields.size();
        continue;
      }
      fail(ErrorKind::Parse, name + ":" + std::to_string(lineno) + ": field " + std::to_string(bad + 1) +
                                 " is not a number: '" + fields[bad] + "'");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      fail(ErrorKind::Parse, name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                                 " fields, got " + std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

/// Reads a samples-by-features matrix, sniffing the binary magic.
inline MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kMagic.data(), 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_binary(in, path) : read_csv(in, path);
}

inline void write_binary(std::ostream& out, const MatrixXd& m) {
  require(m.rows() <= 0xffffffffLL && m.cols() <= 0xffffffffLL, ErrorKind::InvalidArgument,
          "matrix too large for binary format");
  char header[12];
  std::memcpy(header, kMagic.data(), 4);
  detail::store_u32(static_cast<std::uint32_t>(m.rows()), header + 4);
  detail::store_u32(static_cast<std::uint32_t>(m.cols()), header + 8);
  out.write(header, 12);
  char buf[8];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      detail::store_f64(m(r, c), buf);
      out.write(buf, 8);
    }
  }
}

inline void write_binary(const std::string& path, const MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path + "'");
  write_binary(out, m);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path + "'");
}

/// One class tag per line; blank lines and lines starting with '#' are skipped.
inline std::vector<std::string> read_labels(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    tags.push_back(line.substr(b, e - b + 1));
  }
  return tags;
}

}  // namespace gul::io

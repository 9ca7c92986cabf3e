#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace deepntk::io {

// shortest decimal string that round-trips to the same double
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int precision) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size();
}

inline std::vector<std::string_view> split_line(std::string_view line, char sep = ',') {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace deepntk::io

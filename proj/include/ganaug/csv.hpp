#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ganaug/error.hpp"

namespace ganaug {

// Floats in CSV output carry 6 significant digits.
inline std::string csv_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string csv_int(long long v) { return std::to_string(v); }

// Header plus rows, comma separators, LF line endings, no trailing spaces.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& row : rows) line(row);
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::IoError, "cannot write " + path);
    std::string text = to_string();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    require(out.good(), ErrorKind::IoError, "short write to " + path);
  }
};

}  // namespace ganaug

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vasso {

/// Formats a real with 17 significant digits and '.' as decimal separator,
/// enough for a lossless 64-bit round trip.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Line-buffered CSV writer with a fixed header and a row counter.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& header)
      : out_(path, std::ios::binary), path_(path.string()) {
    if (!out_) throw std::runtime_error("cannot open " + path_);
    write_cells(header);
  }

  void row(const std::vector<std::string>& cells) {
    write_cells(cells);
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  const std::string& path() const { return path_; }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::string path_;
  std::size_t rows_ = 0;
};

}  // namespace vasso

#pragma once

// Diagnostics CSV (one DiagnosticsRecord per row, columns as csv_header(),
// numbers as %.17g so every double round-trips) and JSON documents.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "phm/diagnostics.hpp"
#include "phm/errors.hpp"

namespace phm {

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw SnapshotError("cannot open '" + path.string() + "' for writing");
    const auto h = csv_header();
    for (std::size_t i = 0; i < h.size(); ++i) out_ << (i ? "," : "") << h[i];
    out_ << '\n';
  }

  void write(const DiagnosticsRecord& r) {
    const auto v = csv_values(r);
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i == 0)
        std::snprintf(buf, sizeof buf, "%zu", r.step);
      else
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      out_ << (i ? "," : "") << buf;
    }
    out_ << '\n';
  }

  void flush() {
    out_.flush();
    if (!out_) throw SnapshotError("diagnostics CSV: write failed");
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SnapshotError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw SnapshotError("write failed for '" + path.string() + "'");
}

/// JSON number, or null for non-finite values (JSON has no inf/nan).
inline nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace phm

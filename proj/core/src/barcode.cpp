// SPDX-License-Identifier: Apache-2.0
#include "diffseg/barcode.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diffseg/errors.hpp"
#include "diffseg/metrics.hpp"

namespace diffseg {

namespace {

// 20-entry qualitative palette, cycled for higher class indices.
constexpr std::array<const char*, 20> kPalette = {
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1",
    "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr int kWidth = 1000;
constexpr int kBarHeight = 28;
constexpr int kRowGap = 6;
constexpr int kTitleWidth = 150;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_barcode_svg(const std::vector<BarcodeRow>& rows) {
  if (rows.empty()) throw ValidationError("render_barcode_svg: no rows");
  const std::size_t len = rows.front().labels.size();
  if (len == 0) throw ValidationError("render_barcode_svg: empty label row");
  for (const BarcodeRow& r : rows)
    if (r.labels.size() != len)
      throw ShapeError("render_barcode_svg: row '" + r.title + "' has " +
                       std::to_string(r.labels.size()) + " frames, expected " +
                       std::to_string(len));

  const int height = static_cast<int>(rows.size()) * (kBarHeight + kRowGap) + kRowGap;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kTitleWidth + kWidth
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << kTitleWidth + kWidth << " " << height
     << "\">\n";

  char buf[256];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int y = kRowGap + static_cast<int>(r) * (kBarHeight + kRowGap);
    if (!rows[r].title.empty()) {
      std::snprintf(buf, sizeof(buf),
                    "<text x=\"4\" y=\"%d\" font-family=\"monospace\" font-size=\"12\">",
                    y + kBarHeight / 2 + 4);
      os << buf << escape_xml(rows[r].title) << "</text>\n";
    }
    for (const Segment& seg : to_segments(rows[r].labels)) {
      // Fixed-point x coordinates keep the output byte-stable.
      const long long x0 = kTitleWidth + static_cast<long long>(seg.start) * kWidth * 100 /
                                             static_cast<long long>(len) / 100;
      const long long x1 = kTitleWidth + static_cast<long long>(seg.end) * kWidth * 100 /
                                             static_cast<long long>(len) / 100;
      const char* color = kPalette[static_cast<std::size_t>(seg.label) % kPalette.size()];
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%lld\" y=\"%d\" width=\"%lld\" height=\"%d\" fill=\"%s\"/>\n", x0,
                    y, x1 - x0, kBarHeight, color);
      os << buf;
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_barcode_svg(const std::string& path, const std::vector<BarcodeRow>& rows) {
  const std::string svg = render_barcode_svg(rows);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("write_barcode_svg: cannot open '" + path + "'");
  os << svg;
  os.flush();
  if (!os) throw IoError("write_barcode_svg: write failed for '" + path + "'");
}

}  // namespace diffseg

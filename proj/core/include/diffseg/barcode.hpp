// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "diffseg/matrix.hpp"

namespace diffseg {

/// One horizontal bar: a title and the per-frame labels it visualizes.
struct BarcodeRow {
  std::string title;
  LabelSeq labels;
};

/// Deterministic SVG: one bar per row, segment widths proportional to frame
/// counts, colors from a fixed class-indexed palette. All rows must share one
/// length. Byte-identical output for identical inputs.
std::string render_barcode_svg(const std::vector<BarcodeRow>& rows);

void write_barcode_svg(const std::string& path, const std::vector<BarcodeRow>& rows);

}  // namespace diffseg

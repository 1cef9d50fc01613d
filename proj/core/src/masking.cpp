// SPDX-License-Identifier: Apache-2.0
#include "diffseg/masking.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "diffseg/errors.hpp"

namespace diffseg {

char mask_kind_char(MaskKind k) {
  switch (k) {
    case MaskKind::N: return 'N';
    case MaskKind::P: return 'P';
    case MaskKind::B: return 'B';
    case MaskKind::R: return 'R';
  }
  return '?';
}

MaskKind parse_mask_kind(char c) {
  switch (c) {
    case 'N': return MaskKind::N;
    case 'P': return MaskKind::P;
    case 'B': return MaskKind::B;
    case 'R': return MaskKind::R;
    default: throw ConfigError(std::string("parse_mask_kind: unknown kind '") + c + "'");
  }
}

std::vector<MaskKind> parse_mask_kinds(const std::string& s) {
  if (s.empty()) throw ConfigError("parse_mask_kinds: empty kind set");
  std::vector<MaskKind> kinds;
  for (char c : s) {
    const MaskKind k = parse_mask_kind(c);
    if (std::find(kinds.begin(), kinds.end(), k) != kinds.end())
      throw ConfigError(std::string("parse_mask_kinds: duplicate kind '") + c + "'");
    kinds.push_back(k);
  }
  return kinds;
}

std::string mask_kinds_string(std::span<const MaskKind> kinds) {
  std::string s;
  for (MaskKind k : kinds) s += mask_kind_char(k);
  return s;
}

std::vector<double> hard_boundaries(const LabelSeq& labels) {
  if (labels.empty()) throw ValidationError("hard_boundaries: empty label sequence");
  std::vector<double> b(labels.size() - 1, 0.0);
  for (std::size_t i = 0; i + 1 < labels.size(); ++i)
    b[i] = labels[i] != labels[i + 1] ? 1.0 : 0.0;
  return b;
}

BoundarySoft soften_boundaries(const std::vector<double>& boundaries, double std_dev) {
  if (!(std_dev > 0.0)) throw ConfigError("soften_boundaries: std must be positive");
  const int radius = static_cast<int>(std::ceil(4.0 * std_dev));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int j = -radius; j <= radius; ++j)
    kernel[static_cast<std::size_t>(j + radius)] =
        std::exp(-0.5 * (static_cast<double>(j) * j) / (std_dev * std_dev));

  BoundarySoft out;
  out.kernel_std = std_dev;
  const int n = static_cast<int>(boundaries.size());
  out.values.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = -radius; j <= radius; ++j) {
      const int src = i + j;
      if (src < 0 || src >= n) continue;
      acc += kernel[static_cast<std::size_t>(j + radius)] * boundaries[static_cast<std::size_t>(src)];
    }
    out.values[static_cast<std::size_t>(i)] = std::min(acc, 1.0);
  }
  return out;
}

ConditionMask make_mask(MaskKind kind, const LabelSeq& y0, const BoundarySoft& bsoft, Rng& rng,
                        std::ostream* diag) {
  const std::size_t len = y0.size();
  if (len == 0) throw ValidationError("make_mask: empty label sequence");
  ConditionMask mask;
  mask.kind = kind;
  mask.values.assign(len, 1);

  switch (kind) {
    case MaskKind::N:
      break;
    case MaskKind::P:
      std::fill(mask.values.begin(), mask.values.end(), std::uint8_t{0});
      break;
    case MaskKind::B: {
      if (bsoft.values.size() + 1 != len)
        throw ShapeError("make_mask: soft boundaries have " + std::to_string(bsoft.values.size()) +
                         " gaps for " + std::to_string(len) + " frames");
      for (std::size_t i = 0; i < len; ++i) {
        const double left = i > 0 ? bsoft.values[i - 1] : 0.0;
        const double right = i < bsoft.values.size() ? bsoft.values[i] : 0.0;
        if (std::max(left, right) >= 0.5) mask.values[i] = 0;
      }
      break;
    }
    case MaskKind::R: {
      std::set<int> present(y0.begin(), y0.end());
      if (present.size() <= 1) {
        if (diag == nullptr) diag = &std::cerr;
        *diag << "make_mask: single-class video, R mask degenerates to P\n";
        std::fill(mask.values.begin(), mask.values.end(), std::uint8_t{0});
        break;
      }
      std::vector<int> classes(present.begin(), present.end());
      const int erased = classes[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(classes.size()) - 1))];
      for (std::size_t i = 0; i < len; ++i)
        if (y0[i] == erased) mask.values[i] = 0;
      break;
    }
  }
  return mask;
}

MaskKind sample_mask_kind(std::span<const MaskKind> enabled, Rng& rng) {
  if (enabled.empty()) throw ConfigError("sample_mask_kind: enabled set is empty");
  return enabled[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int>(enabled.size()) - 1))];
}

Matrix apply_mask(const Matrix& features, const ConditionMask& mask) {
  if (static_cast<int>(mask.values.size()) != features.rows)
    throw ShapeError("apply_mask: mask length " + std::to_string(mask.values.size()) +
                     " vs features " + features.shape_str());
  Matrix out = features;
  for (int i = 0; i < out.rows; ++i) {
    if (mask.values[static_cast<std::size_t>(i)]) continue;
    for (int c = 0; c < out.cols; ++c) out.at(i, c) = 0.0;
  }
  return out;
}

}  // namespace diffseg

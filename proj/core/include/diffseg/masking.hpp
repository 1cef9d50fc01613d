// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "diffseg/matrix.hpp"
#include "diffseg/rng.hpp"

namespace diffseg {

/// Condition mask families applied to the encoded features during training:
///   N keeps everything, P blocks everything, B erases frames near label
///   boundaries, R erases all frames of one randomly chosen present class.
enum class MaskKind : std::uint8_t { N, P, B, R };

char mask_kind_char(MaskKind k);
MaskKind parse_mask_kind(char c);
/// Parses a compact kind set like "NPBR" or "NB".
std::vector<MaskKind> parse_mask_kinds(const std::string& s);
std::string mask_kinds_string(std::span<const MaskKind> kinds);

/// Gap indicator of length L-1: entry i is 1 iff frames i and i+1 have
/// different labels. Empty for L == 1.
std::vector<double> hard_boundaries(const LabelSeq& labels);

/// Gaussian-smoothed boundary strengths per gap, clipped to [0, 1]. An
/// isolated boundary peaks at exactly 1.
struct BoundarySoft {
  std::vector<double> values;  // length L-1
  double kernel_std = 0.0;
};

/// Convolve the gap indicator with an unnormalized Gaussian (radius
/// ceil(4 * std), zero-extended), then clip to [0, 1].
BoundarySoft soften_boundaries(const std::vector<double>& boundaries, double std_dev);

struct ConditionMask {
  std::vector<std::uint8_t> values;  // length L, 1 = feature passes
  MaskKind kind = MaskKind::N;
};

/// Build a mask of the given kind for one video.
///   B: frame i is erased iff max(bsoft[i-1], bsoft[i]) >= 0.5, with
///      out-of-range gaps treated as 0, so both frames of a boundary pair go.
///   R: the erased class is drawn uniformly from classes present in y0;
///      a single-class video degenerates to P and a diagnostic is written
///      to `diag` (stderr when null).
ConditionMask make_mask(MaskKind kind, const LabelSeq& y0, const BoundarySoft& bsoft, Rng& rng,
                        std::ostream* diag = nullptr);

/// Uniform draw over the enabled kinds.
MaskKind sample_mask_kind(std::span<const MaskKind> enabled, Rng& rng);

/// Zero the masked rows of the feature matrix (row i survives iff mask[i]).
Matrix apply_mask(const Matrix& features, const ConditionMask& mask);

}  // namespace diffseg

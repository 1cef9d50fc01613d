// SPDX-License-Identifier: Apache-2.0
// Brute-force reference implementations used only by tests. Each oracle takes
// an independent path from the library code it checks: recursive memoized
// edit distance instead of the rolling-array DP, frame-set IoU counting
// instead of interval arithmetic, padded-array convolution instead of the
// windowed loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "diffseg/matrix.hpp"
#include "diffseg/metrics.hpp"

namespace oracles {

inline int levenshtein_memo(const std::vector<int>& a, const std::vector<int>& b, std::size_t i,
                            std::size_t j, std::map<std::pair<std::size_t, std::size_t>, int>& memo) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  const auto key = std::make_pair(i, j);
  const auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  int best = levenshtein_memo(a, b, i + 1, j + 1, memo) + (a[i] == b[j] ? 0 : 1);
  best = std::min(best, levenshtein_memo(a, b, i + 1, j, memo) + 1);
  best = std::min(best, levenshtein_memo(a, b, i, j + 1, memo) + 1);
  memo[key] = best;
  return best;
}

inline int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  return levenshtein_memo(a, b, 0, 0, memo);
}

/// Independent run-length encoding (scan for run ends rather than starts).
inline std::vector<diffseg::Segment> segments(const diffseg::LabelSeq& labels) {
  std::vector<diffseg::Segment> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1] == labels[i]) ++j;
    out.push_back({labels[i], static_cast<int>(i), static_cast<int>(j + 1)});
    i = j + 1;
  }
  return out;
}

inline double edit_score(const diffseg::LabelSeq& pred, const diffseg::LabelSeq& gt) {
  std::vector<int> a, b;
  for (const auto& s : segments(pred)) a.push_back(s.label);
  for (const auto& s : segments(gt)) b.push_back(s.label);
  const int dist = levenshtein(a, b);
  const double denom = static_cast<double>(std::max(a.size(), b.size()));
  return std::max(0.0, 100.0 * (1.0 - dist / denom));
}

/// IoU by counting frames one by one.
inline double frame_iou(const diffseg::Segment& a, const diffseg::Segment& b, int total_len) {
  int inter = 0, uni = 0;
  for (int f = 0; f < total_len; ++f) {
    const bool in_a = f >= a.start && f < a.end;
    const bool in_b = f >= b.start && f < b.end;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

struct F1Counts {
  int tp = 0, fp = 0, fn = 0;
};

/// Greedy single-use matching evaluated with exhaustive frame-level scans.
inline F1Counts f1_counts(const diffseg::LabelSeq& pred, const diffseg::LabelSeq& gt, double tau,
                          bool ties_count) {
  const auto ps = segments(pred);
  const auto gs = segments(gt);
  const int len = static_cast<int>(gt.size());
  std::vector<bool> used(gs.size(), false);
  F1Counts c;
  for (const auto& p : ps) {
    double best = -1.0;
    int best_idx = -1;
    for (std::size_t j = 0; j < gs.size(); ++j) {
      if (gs[j].label != p.label) continue;
      const double v = frame_iou(p, gs[j], len);
      if (v > best) {
        best = v;
        best_idx = static_cast<int>(j);
      }
    }
    const bool passes = ties_count ? best >= tau : best > tau;
    if (best_idx >= 0 && passes && !used[static_cast<std::size_t>(best_idx)]) {
      used[static_cast<std::size_t>(best_idx)] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = static_cast<int>(gs.size()) - c.tp;
  return c;
}

/// Discrete Gaussian smoothing via an explicitly zero-padded array.
inline std::vector<double> soften(const std::vector<double>& b, double std_dev) {
  const int radius = static_cast<int>(std::ceil(4.0 * std_dev));
  const int n = static_cast<int>(b.size());
  std::vector<double> padded(static_cast<std::size_t>(n + 2 * radius), 0.0);
  for (int i = 0; i < n; ++i) padded[static_cast<std::size_t>(i + radius)] = b[static_cast<std::size_t>(i)];
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j <= 2 * radius; ++j) {
      const double offset = static_cast<double>(j - radius);
      acc += padded[static_cast<std::size_t>(i + j)] *
             std::exp(-offset * offset / (2.0 * std_dev * std_dev));
    }
    out[static_cast<std::size_t>(i)] = std::min(acc, 1.0);
  }
  return out;
}

}  // namespace oracles

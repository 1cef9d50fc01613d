// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>
#include <vector>

#include "diffseg/matrix.hpp"

namespace diffseg {

/// Maximal run of one label; [start, end) in frames. Consecutive segments of
/// a segmentation carry different labels and tile [0, L).
struct Segment {
  int label = 0;
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

/// Run-length encoding of a label sequence.
std::vector<Segment> to_segments(const LabelSeq& labels);

/// 100 * (#matching frames) / L. Sequences must have equal length.
double frame_accuracy(const LabelSeq& pred, const LabelSeq& gt);

/// 100 * (1 - levenshtein(segment labels) / max(#segments)), floored at 0.
/// Unit costs for insertion, deletion and substitution; durations ignored.
double edit_score(const LabelSeq& pred, const LabelSeq& gt);

struct F1Result {
  double precision = 0.0;  // percentages
  double recall = 0.0;
  double f1 = 0.0;
  int tp = 0, fp = 0, fn = 0;
};

/// Whether an IoU exactly at the threshold counts as a hit.
enum class IouTieRule { GreaterEqual, Greater };

/// Segmental F1 at IoU threshold tau in (0, 1). Each predicted segment takes
/// the same-label ground-truth segment of maximal frame IoU; it is a true
/// positive iff the IoU passes tau and that segment is unused, else a false
/// positive. Unmatched ground-truth segments are false negatives. Segments
/// whose label is in `ignore` are dropped from both sides.
F1Result f1_at(const LabelSeq& pred, const LabelSeq& gt, double tau,
               const std::set<int>* ignore = nullptr,
               IouTieRule tie = IouTieRule::GreaterEqual);

struct MetricReport {
  double acc = 0.0;
  double edit = 0.0;
  double f1_10 = 0.0;
  double f1_25 = 0.0;
  double f1_50 = 0.0;
  double avg = 0.0;  // arithmetic mean of the five entries
};

enum class AccAggregation { FrameWeighted, VideoAveraged };

struct EvalOptions {
  AccAggregation acc_aggregation = AccAggregation::FrameWeighted;
  IouTieRule iou_tie = IouTieRule::GreaterEqual;
  std::set<int> ignore_classes;
};

/// Dataset-level report: accuracy over concatenated frames (or averaged per
/// video), edit averaged per video, F1 from true/false positive counts summed
/// over the split.
MetricReport evaluate_split(const std::vector<LabelSeq>& preds, const std::vector<LabelSeq>& gts,
                            const EvalOptions& opts = {});

/// CSV serialization with a fixed header and %.6f fields.
std::string metric_csv_header();
std::string metric_csv_row(const std::string& split, const MetricReport& report);

}  // namespace diffseg

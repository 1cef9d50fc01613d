// SPDX-License-Identifier: Apache-2.0
#include "diffseg/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "diffseg/errors.hpp"

namespace diffseg {

std::vector<Segment> to_segments(const LabelSeq& labels) {
  if (labels.empty()) throw ValidationError("to_segments: empty label sequence");
  std::vector<Segment> segs;
  int start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[i - 1]) {
      segs.push_back({labels[i - 1], start, static_cast<int>(i)});
      start = static_cast<int>(i);
    }
  }
  return segs;
}

double frame_accuracy(const LabelSeq& pred, const LabelSeq& gt) {
  if (pred.size() != gt.size())
    throw ShapeError("frame_accuracy: length mismatch " + std::to_string(pred.size()) + " vs " +
                     std::to_string(gt.size()));
  if (pred.empty()) throw ValidationError("frame_accuracy: empty sequences");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == gt[i]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::vector<Segment> filtered_segments(const LabelSeq& labels, const std::set<int>* ignore) {
  std::vector<Segment> segs = to_segments(labels);
  if (ignore && !ignore->empty()) {
    std::erase_if(segs, [&](const Segment& s) { return ignore->contains(s.label); });
  }
  return segs;
}

std::vector<int> segment_labels(const std::vector<Segment>& segs) {
  std::vector<int> out;
  out.reserve(segs.size());
  for (const Segment& s : segs) out.push_back(s.label);
  return out;
}

double iou(const Segment& a, const Segment& b) {
  const int inter = std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const int uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

struct Counts {
  int tp = 0, fp = 0, fn = 0;
};

Counts f1_counts(const std::vector<Segment>& pred, const std::vector<Segment>& gt, double tau,
                 IouTieRule tie) {
  Counts c;
  std::vector<bool> used(gt.size(), false);
  for (const Segment& p : pred) {
    double best = -1.0;
    int best_idx = -1;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt[j].label != p.label) continue;
      const double v = iou(p, gt[j]);
      if (v > best) {
        best = v;
        best_idx = static_cast<int>(j);
      }
    }
    const bool passes =
        tie == IouTieRule::GreaterEqual ? best >= tau : best > tau;
    if (best_idx >= 0 && passes && !used[static_cast<std::size_t>(best_idx)]) {
      used[static_cast<std::size_t>(best_idx)] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = static_cast<int>(gt.size()) - c.tp;
  return c;
}

F1Result f1_from_counts(const Counts& c) {
  F1Result r;
  r.tp = c.tp;
  r.fp = c.fp;
  r.fn = c.fn;
  r.precision = c.tp + c.fp > 0 ? 100.0 * c.tp / (c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn > 0 ? 100.0 * c.tp / (c.tp + c.fn) : 0.0;
  const double pr = r.precision + r.recall;
  r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
  return r;
}

}  // namespace

double edit_score(const LabelSeq& pred, const LabelSeq& gt) {
  if (pred.empty() || gt.empty()) throw ValidationError("edit_score: empty sequences");
  const std::vector<int> a = segment_labels(to_segments(pred));
  const std::vector<int> b = segment_labels(to_segments(gt));
  const int dist = levenshtein(a, b);
  const int denom = static_cast<int>(std::max(a.size(), b.size()));
  return std::max(0.0, 100.0 * (1.0 - static_cast<double>(dist) / denom));
}

F1Result f1_at(const LabelSeq& pred, const LabelSeq& gt, double tau, const std::set<int>* ignore,
               IouTieRule tie) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("f1_at: tau " + std::to_string(tau) + " outside (0, 1)");
  if (pred.size() != gt.size())
    throw ShapeError("f1_at: length mismatch " + std::to_string(pred.size()) + " vs " +
                     std::to_string(gt.size()));
  return f1_from_counts(
      f1_counts(filtered_segments(pred, ignore), filtered_segments(gt, ignore), tau, tie));
}

MetricReport evaluate_split(const std::vector<LabelSeq>& preds, const std::vector<LabelSeq>& gts,
                            const EvalOptions& opts) {
  if (preds.size() != gts.size() || preds.empty())
    throw ShapeError("evaluate_split: need equal, nonempty prediction/ground-truth lists");

  const double taus[3] = {0.10, 0.25, 0.50};
  Counts counts[3];
  double edit_sum = 0.0;
  double acc_sum = 0.0;
  long long frames_correct = 0, frames_total = 0;

  const std::set<int>* ignore = opts.ignore_classes.empty() ? nullptr : &opts.ignore_classes;
  for (std::size_t v = 0; v < preds.size(); ++v) {
    const LabelSeq& p = preds[v];
    const LabelSeq& g = gts[v];
    if (p.size() != g.size())
      throw ShapeError("evaluate_split: video " + std::to_string(v) + " length mismatch");
    acc_sum += frame_accuracy(p, g);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] == g[i]) ++frames_correct;
    frames_total += static_cast<long long>(p.size());
    edit_sum += edit_score(p, g);
    const std::vector<Segment> ps = filtered_segments(p, ignore);
    const std::vector<Segment> gs = filtered_segments(g, ignore);
    for (int k = 0; k < 3; ++k) {
      const Counts c = f1_counts(ps, gs, taus[k], opts.iou_tie);
      counts[k].tp += c.tp;
      counts[k].fp += c.fp;
      counts[k].fn += c.fn;
    }
  }

  MetricReport r;
  r.acc = opts.acc_aggregation == AccAggregation::FrameWeighted
              ? 100.0 * static_cast<double>(frames_correct) / static_cast<double>(frames_total)
              : acc_sum / static_cast<double>(preds.size());
  r.edit = edit_sum / static_cast<double>(preds.size());
  r.f1_10 = f1_from_counts(counts[0]).f1;
  r.f1_25 = f1_from_counts(counts[1]).f1;
  r.f1_50 = f1_from_counts(counts[2]).f1;
  r.avg = (r.acc + r.edit + r.f1_10 + r.f1_25 + r.f1_50) / 5.0;
  return r;
}

std::string metric_csv_header() { return "split,acc,edit,f1_10,f1_25,f1_50,avg"; }

std::string metric_csv_row(const std::string& split, const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", split.c_str(), r.acc, r.edit,
                r.f1_10, r.f1_25, r.f1_50, r.avg);
  return buf;
}

}  // namespace diffseg

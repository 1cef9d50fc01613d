// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diffseg/config.hpp"
#include "diffseg/diffusion.hpp"
#include "diffseg/losses.hpp"
#include "diffseg/model.hpp"
#include "diffseg/synthdata.hpp"

namespace diffseg {

/// First-order adaptive-moment optimizer with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update from the gradients accumulated in the store. Iterates blocks
  /// in store order so updates are bit-reproducible.
  void step(ParamStore& params);

  std::int64_t t() const { return t_; }
  void save_into(TrainerState& state) const;
  void load_from(const TrainerState& state, const ParamStore& params);

 private:
  void ensure_buffers(const ParamStore& params);
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Per-video tensors precomputed once per run.
struct VideoTensors {
  const VideoSample* video = nullptr;
  Matrix y0_diffusion;  // 2 * one_hot - 1
  Matrix y0_one_hot;
  BoundarySoft bsoft;
};

struct TrainLogRecord {
  long long iteration = 0;
  int epoch = 0;
  std::vector<int> steps;       // sampled corruption step per batch item
  std::vector<char> mask_kinds; // sampled mask kind per batch item
  LossBreakdown losses;         // averaged over the batch
  double wall_ms = 0.0;
  std::string to_line() const;  // key=value record, one per iteration
};

/// One optimizer update on a batch: per sample encode, corrupt the signed
/// labels at a uniformly drawn step, build and apply a sampled condition
/// mask, decode, and accumulate the combined loss. Aborts with diagnostics
/// if the loss turns non-finite.
TrainLogRecord train_step(Model& model, AdamOptimizer& opt, const NoiseSchedule& sch,
                          const ExperimentConfig& cfg, const std::vector<const VideoTensors*>& batch,
                          Rng& rng, long long iteration, int epoch);

struct TrainResult {
  std::string checkpoint_path;
  long long iterations = 0;
  double final_loss = 0.0;
};

/// Full training over the train split: shuffled batches, per-iteration log
/// records under out_dir/train_log.txt, checkpoints at the configured
/// cadence plus a final out_dir/checkpoint.bin with optimizer and generator
/// state so an interrupted run resumes bit-exactly.
TrainResult train(const SyntheticDataset& ds, const ExperimentConfig& cfg,
                  const std::string& out_dir, const std::string& resume_from = "");

struct EvalSettings {
  int inference_steps = 25;
  std::uint64_t seed = 13;
  MaskKind cond_mask = MaskKind::N;
  double boundary_std = 2.0;  // for rebuilding the B mask at inference
  bool oracle_decoder = false;  // bypass the model with ground-truth output
  int threads = 1;
  bool keep_trajectory = false;
  EvalOptions metric_opts;
};

struct EvalResult {
  std::vector<std::string> video_ids;
  std::vector<LabelSeq> predictions;
  std::vector<LabelSeq> ground_truth;
  std::vector<InferenceResult> trajectories;  // empty unless keep_trajectory
  MetricReport report;
};

/// Iterative-denoising inference over every id in `split`, then the metric
/// report. The per-video noise seed mixes the global seed with the video id.
EvalResult evaluate(const SyntheticDataset& ds, const std::vector<std::string>& split,
                    const Model& model, const NoiseSchedule& sch, const EvalSettings& settings);

}  // namespace diffseg

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffseg/losses.hpp"
#include "diffseg/masking.hpp"
#include "diffseg/metrics.hpp"
#include "diffseg/model.hpp"
#include "diffseg/schedule.hpp"
#include "diffseg/synthdata.hpp"

namespace diffseg {

/// Every knob of an experiment in one flat sectioned text file
/// ([section] headers, key=value lines, '#' comments). Unknown sections or
/// keys are rejected; the fully resolved config is echoed into every output
/// directory so artifacts record their own provenance.
struct ExperimentConfig {
  // [data]
  GeneratorConfig data;
  TaskGrammar grammar;

  // [schedule]
  int schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double eta = 1.0;

  // [model]
  int encoder_layers = 6;
  int encoder_width = 16;
  std::vector<int> encoder_taps;  // empty = last layer
  int decoder_layers = 5;
  int decoder_width = 8;
  int step_embed_dim = 64;
  std::uint64_t init_seed = 3;

  // [losses]
  LossWeights loss;

  // [train]
  int epochs = 60;
  int batch_size = 4;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t train_seed = 11;
  std::vector<MaskKind> mask_kinds = {MaskKind::N, MaskKind::P, MaskKind::B, MaskKind::R};
  double boundary_std = 2.0;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 keeps only the final one

  // [eval]
  int inference_steps = 25;
  std::uint64_t eval_seed = 13;
  AccAggregation acc_aggregation = AccAggregation::FrameWeighted;
  IouTieRule iou_tie = IouTieRule::GreaterEqual;

  NoiseSchedule make_schedule() const;
  EncoderConfig encoder_config() const;
  DecoderConfig decoder_config() const;
  EvalOptions eval_options() const;
  void validate() const;

  /// Canonical serialization of every effective value; parses back to an
  /// identical config and is byte-stable across runs.
  std::string resolved_text() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace diffseg

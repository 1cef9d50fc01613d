// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffseg/matrix.hpp"

namespace diffseg {

/// Activity grammar: ordered phases, each holding candidate action classes
/// that occur independently with their probability (at least the first
/// candidate is forced when none is drawn). With probability swap_prob one
/// uniformly chosen adjacent phase pair exchanges position in a video.
struct TaskGrammar {
  struct Candidate {
    int class_id = 0;
    double prob = 1.0;
  };
  struct Duration {
    double mean = 40.0;
    double std = 12.0;
    int min = 10;
  };

  std::vector<std::vector<Candidate>> phases;
  std::vector<Duration> class_durations;  // indexed by class id
  double swap_prob = 0.0;

  void validate(int num_classes) const;
  int max_actions_per_video() const;
  int min_duration() const;
};

struct GeneratorConfig {
  int num_classes = 6;
  int feature_dim = 16;
  int n_videos = 80;
  int n_train = 60;  // first n_train ids form the train split
  int length_min = 150;
  int length_max = 250;
  double noise_std = 0.5;
  int blend_width = 8;  // frames of prototype cross-fade around each boundary
  std::uint64_t seed = 7;

  void validate() const;
};

struct VideoSample {
  std::string id;
  Matrix features;  // L x D, float32-quantized
  LabelSeq labels;  // length L
};

struct SyntheticDataset {
  int num_classes = 0;
  int feature_dim = 0;
  Matrix prototypes;  // C x D unit rows, float32-quantized
  double noise_std = 0.0;
  int blend_width = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<VideoSample> videos;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  const VideoSample& video(const std::string& id) const;
  bool operator==(const SyntheticDataset&) const = default;
};

/// Deterministic generator. Per-video randomness derives from the dataset
/// seed and the video index, so regeneration is byte-identical. Class
/// positions correlate with normalized time through the phase order, class
/// order follows the grammar, and features cross-fade between the unit-norm
/// class prototypes around boundaries before noise is added.
SyntheticDataset generate(const TaskGrammar& grammar, const GeneratorConfig& cfg);

/// On-disk layout under `dir`:
///   meta.txt                key=value dataset header
///   mapping.txt             "index<space>name" per class
///   prototypes.bin          binary block, same framing as features
///   features/<id>.bin       16-byte header (magic "DSEG", version, L, D)
///                           followed by L*D little-endian float32
///   groundTruth/<id>.txt    one class name per line
///   splits/train.bundle     one video id per line
///   splits/test.bundle
void write_dataset(const SyntheticDataset& ds, const std::string& dir);
SyntheticDataset read_dataset(const std::string& dir);

/// Classify each frame by the nearest prototype in feature space. The weak
/// reference every trained model has to beat.
LabelSeq nearest_prototype_labels(const Matrix& features, const Matrix& prototypes);

/// Random-guess reference: the ground-truth frames of each video shuffled
/// uniformly, preserving the class histogram but destroying the order.
std::vector<LabelSeq> permuted_label_baseline(const std::vector<LabelSeq>& gts, std::uint64_t seed);

}  // namespace diffseg

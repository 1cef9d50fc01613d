// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffseg/autodiff.hpp"
#include "diffseg/matrix.hpp"

namespace diffseg {

/// Dilated-convolution encoder: a 1x1 input projection followed by residual
/// blocks with dilations 1, 2, 4, ... and kernel 3. Selected tap layers are
/// concatenated along the feature axis to form the conditioning features; a
/// linear head with row softmax gives the auxiliary frame prediction.
struct EncoderConfig {
  int layers = 10;
  int width = 64;
  int input_dim = 0;
  int num_classes = 0;
  std::vector<int> tap_layers;  // 1-based; empty means {layers}

  std::vector<int> resolved_taps() const;
  int cond_dim() const { return width * static_cast<int>(resolved_taps().size()); }
  void validate() const;
};

/// Step-conditioned decoder over the same residual block. The signed state is
/// concatenated with the conditioning features, projected to the decoder
/// width, and a projected sinusoidal step embedding is added to every frame.
struct DecoderConfig {
  int layers = 8;
  int width = 0;
  int step_embed_dim = 512;
  int num_classes = 0;
  int cond_dim = 0;      // feature dimension of the conditioning input
  int total_steps = 1000;  // S; bounds the admissible step argument

  void validate() const;
};

/// Sinusoidal step encoding: first half sines, second half cosines over
/// geometrically spaced frequencies. 1 x dim row vector; dim must be even.
Matrix step_embedding(int step, int dim, int total_steps);

/// Encoder h and decoder g with a shared parameter store. Parameters are
/// enumerable as named blocks for checkpointing and gradient checks.
class Model {
 public:
  Model(EncoderConfig enc, DecoderConfig dec);

  /// Fan-in-scaled uniform weights, zero biases, deterministic in the seed.
  void init_params(std::uint64_t seed);

  const EncoderConfig& encoder_config() const { return enc_; }
  const DecoderConfig& decoder_config() const { return dec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Encoded {
    Var cond;  // L x cond_dim
    Var aux;   // L x C, rows sum to 1
  };
  /// Graph-building forward passes; call on a caller-owned tape.
  Encoded encode(Tape& tape, Var features) const;
  Var decode(Tape& tape, Var state, int step, Var cond) const;

  /// Value-only conveniences for inference paths.
  struct EncodedValue {
    Matrix cond;
    Matrix aux;
  };
  EncodedValue encode_value(const Matrix& features) const;
  Matrix decode_value(const Matrix& state, int step, const Matrix& cond) const;

 private:
  EncoderConfig enc_;
  DecoderConfig dec_;
  ParamStore params_;
};

/// Optimizer and loop state stored alongside parameters so an interrupted run
/// resumes bit-exactly.
struct TrainerState {
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;  // completed epochs
  std::int64_t adam_t = 0;
  std::vector<Matrix> adam_m;  // per parameter block, in store order
  std::vector<Matrix> adam_v;
  std::string rng_state;
};

/// Checkpoint file: magic "DSCK", format version, a key=value config echo,
/// named parameter blocks as 64-bit little-endian reals, and an optional
/// trainer-state section. Layout details are documented in docs/formats.md.
void save_checkpoint(const std::string& path, const Model& model,
                     const TrainerState* trainer = nullptr, const std::string& extra_echo = "");
Model load_checkpoint(const std::string& path, TrainerState* trainer = nullptr,
                      std::string* extra_echo = nullptr);

}  // namespace diffseg

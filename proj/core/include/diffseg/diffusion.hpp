// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "diffseg/matrix.hpp"
#include "diffseg/rng.hpp"
#include "diffseg/schedule.hpp"

namespace diffseg {

/// One corruption draw: the step, the exact noise used, and the corrupted
/// state. Keeping epsilon makes the corruption invertible in tests.
struct CorruptionRecord {
  int step = 0;
  Matrix epsilon;  // unit-normal draws, same shape as y0
  Matrix y_s;      // sqrt(abar_s) * y0 + epsilon * sqrt(1 - abar_s)
};

/// Closed-form corruption of a signed label state at step s, 1 <= s <= S.
/// y0 entries must lie in [-1, 1].
CorruptionRecord forward_corrupt(const Matrix& y0, int s, const NoiseSchedule& sch, Rng& rng);

/// One reverse update from step s to s_prev (s > s_prev >= 0). The denoised
/// probabilities p_s are mapped to the signed estimate x0 = 2 p_s - 1, then
///   sqrt(abar_prev) * x0
///   + sqrt(1 - abar_prev - sigma_s^2) * (y_s - sqrt(abar_s) * x0) / sqrt(1 - abar_s)
///   + sigma_s * eps.
/// For s_prev == 0 the result is exactly x0 (abar_0 == 1, noise omitted).
Matrix ddim_update(const Matrix& y_s, const Matrix& p_s, int s, int s_prev,
                   const NoiseSchedule& sch, Rng& rng);

/// Step-conditioned denoiser: (state L x C, step, conditioning L x D') -> probabilities L x C.
using Denoiser = std::function<Matrix(const Matrix& state, int step, const Matrix& cond)>;

struct InferenceResult {
  Matrix final_probs;              // denoiser output at the last trajectory step
  std::vector<int> steps;          // trajectory steps where the denoiser ran
  std::vector<Matrix> step_probs;  // P_s per recorded step (empty unless requested)
  std::vector<Matrix> step_states; // state entering each recorded step
};

/// Iterative denoising from seeded unit-normal noise along `trajectory`
/// (strictly decreasing, first element S, last element 0). Conditioning is
/// passed through unmasked. Deterministic given the seed.
InferenceResult run_inference(const Denoiser& denoiser, const Matrix& cond, int num_classes,
                              const NoiseSchedule& sch, const std::vector<int>& trajectory,
                              std::uint64_t seed, bool keep_intermediate = false);

}  // namespace diffseg

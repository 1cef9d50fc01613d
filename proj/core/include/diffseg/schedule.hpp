// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "diffseg/matrix.hpp"

namespace diffseg {

/// Variance-schedule tables over S corruption steps. Step indices are 1-based
/// (beta[s-1] holds the value for step s); step 0 is the clean signal with
/// alpha_bar_at(0) == 1, so the final denoising update lands exactly on the
/// prediction.
struct NoiseSchedule {
  int steps = 0;  // S
  double eta = 1.0;
  std::vector<double> beta;       // beta_s, size S
  std::vector<double> alpha;      // 1 - beta_s
  std::vector<double> alpha_bar;  // running product of alpha
  std::vector<double> sigma;      // DDIM noise scale per step, scaled by eta

  double alpha_bar_at(int s) const;  // s in [0, S]
  double sigma_at(int s) const;      // s in [1, S]
};

/// Linear beta ramp over steps 1..S. sigma follows the DDIM convention
/// sigma_s = eta * sqrt((1 - abar_{s-1}) / (1 - abar_s)) * sqrt(1 - abar_s / abar_{s-1}).
NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end, double eta);

/// Map one-hot labels into the signed space used for corruption: 2y - 1,
/// entries in {-1, +1}. Rows that are not exactly one-hot raise ValidationError.
Matrix to_diffusion_space(const Matrix& one_hot_labels);

/// Inverse affine read-out for intermediate states: (x+1)/2 clipped to [0,1],
/// rows renormalized to sum 1; a row that clips to all zeros becomes uniform.
Matrix from_diffusion_space(const Matrix& state);

/// Evenly spaced (rounded) step indices from S down to 0 inclusive,
/// n_steps + 1 entries, strictly decreasing.
std::vector<int> make_skip_trajectory(int steps, int n_steps);

}  // namespace diffseg

// SPDX-License-Identifier: Apache-2.0
#include "diffseg/diffusion.hpp"

#include <cmath>

#include "diffseg/errors.hpp"

namespace diffseg {

CorruptionRecord forward_corrupt(const Matrix& y0, int s, const NoiseSchedule& sch, Rng& rng) {
  if (s < 1 || s > sch.steps)
    throw ConfigError("forward_corrupt: step " + std::to_string(s) + " outside [1, " +
                      std::to_string(sch.steps) + "]");
  for (double v : y0.data)
    if (!(v >= -1.0 && v <= 1.0))
      throw ValidationError("forward_corrupt: y0 entry " + std::to_string(v) +
                            " outside [-1, 1]");
  CorruptionRecord rec;
  rec.step = s;
  rec.epsilon = rng.normal_matrix(y0.rows, y0.cols);
  const double ab = sch.alpha_bar_at(s);
  rec.y_s = axpby(std::sqrt(ab), y0, std::sqrt(1.0 - ab), rec.epsilon);
  return rec;
}

Matrix ddim_update(const Matrix& y_s, const Matrix& p_s, int s, int s_prev,
                   const NoiseSchedule& sch, Rng& rng) {
  if (!(s > s_prev && s_prev >= 0))
    throw ConfigError("ddim_update: need s > s_prev >= 0, got s=" + std::to_string(s) +
                      " s_prev=" + std::to_string(s_prev));
  if (s > sch.steps)
    throw ConfigError("ddim_update: step " + std::to_string(s) + " beyond schedule");
  require_same_shape(y_s, p_s, "ddim_update");

  // Signed estimate of the clean sequence from the predicted probabilities.
  Matrix x0(p_s.rows, p_s.cols);
  for (int i = 0; i < p_s.size(); ++i) x0.data[i] = 2.0 * p_s.data[i] - 1.0;

  if (s_prev == 0) return x0;  // abar_0 == 1 collapses the update onto the prediction

  const double ab = sch.alpha_bar_at(s);
  const double ab_prev = sch.alpha_bar_at(s_prev);
  const double sig = sch.sigma_at(s);
  const double dir_sq = 1.0 - ab_prev - sig * sig;
  if (dir_sq < 0.0)
    throw ConfigError("ddim_update: 1 - abar_prev - sigma^2 < 0 at s=" + std::to_string(s) +
                      ", s_prev=" + std::to_string(s_prev) + "; schedule misconfigured");

  const double sqrt_ab = std::sqrt(ab);
  const double dir = std::sqrt(dir_sq) / std::sqrt(1.0 - ab);
  Matrix out(y_s.rows, y_s.cols);
  for (int i = 0; i < y_s.size(); ++i)
    out.data[i] = std::sqrt(ab_prev) * x0.data[i] + dir * (y_s.data[i] - sqrt_ab * x0.data[i]);
  if (sig > 0.0) {
    const Matrix eps = rng.normal_matrix(y_s.rows, y_s.cols);
    for (int i = 0; i < out.size(); ++i) out.data[i] += sig * eps.data[i];
  }
  return out;
}

InferenceResult run_inference(const Denoiser& denoiser, const Matrix& cond, int num_classes,
                              const NoiseSchedule& sch, const std::vector<int>& trajectory,
                              std::uint64_t seed, bool keep_intermediate) {
  if (trajectory.size() < 2 || trajectory.front() != sch.steps || trajectory.back() != 0)
    throw ConfigError("run_inference: trajectory must run from S to 0");
  for (std::size_t k = 1; k < trajectory.size(); ++k)
    if (trajectory[k] >= trajectory[k - 1])
      throw ConfigError("run_inference: trajectory must be strictly decreasing");

  Rng rng(seed);
  Matrix state = rng.normal_matrix(cond.rows, num_classes);
  InferenceResult result;
  for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
    const int s = trajectory[k];
    const int s_prev = trajectory[k + 1];
    Matrix probs = denoiser(state, s, cond);
    require_finite(probs, "run_inference: denoiser output");
    result.steps.push_back(s);
    if (keep_intermediate) {
      result.step_states.push_back(state);
      result.step_probs.push_back(probs);
    }
    if (k + 2 == trajectory.size()) result.final_probs = probs;
    state = ddim_update(state, probs, s, s_prev, sch, rng);
  }
  return result;
}

}  // namespace diffseg

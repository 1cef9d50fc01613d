// SPDX-License-Identifier: Apache-2.0
#include "diffseg/schedule.hpp"

#include <cmath>

#include "diffseg/errors.hpp"

namespace diffseg {

double NoiseSchedule::alpha_bar_at(int s) const {
  if (s < 0 || s > steps)
    throw ConfigError("alpha_bar_at: step " + std::to_string(s) + " outside [0, " +
                      std::to_string(steps) + "]");
  return s == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(s - 1)];
}

double NoiseSchedule::sigma_at(int s) const {
  if (s < 1 || s > steps)
    throw ConfigError("sigma_at: step " + std::to_string(s) + " outside [1, " +
                      std::to_string(steps) + "]");
  return sigma[static_cast<std::size_t>(s - 1)];
}

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end, double eta) {
  if (steps < 1) throw ConfigError("make_linear_schedule: steps must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ConfigError("make_linear_schedule: need 0 < beta_start <= beta_end < 1");
  if (eta < 0.0) throw ConfigError("make_linear_schedule: eta must be >= 0");

  NoiseSchedule sch;
  sch.steps = steps;
  sch.eta = eta;
  sch.beta.resize(static_cast<std::size_t>(steps));
  sch.alpha.resize(static_cast<std::size_t>(steps));
  sch.alpha_bar.resize(static_cast<std::size_t>(steps));
  sch.sigma.resize(static_cast<std::size_t>(steps));

  double running = 1.0;
  for (int s = 1; s <= steps; ++s) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(s - 1) / (steps - 1);
    const double b = beta_start + t * (beta_end - beta_start);
    sch.beta[static_cast<std::size_t>(s - 1)] = b;
    sch.alpha[static_cast<std::size_t>(s - 1)] = 1.0 - b;
    running *= 1.0 - b;
    sch.alpha_bar[static_cast<std::size_t>(s - 1)] = running;
  }
  for (int s = 1; s <= steps; ++s) {
    const double ab = sch.alpha_bar_at(s);
    const double ab_prev = sch.alpha_bar_at(s - 1);
    sch.sigma[static_cast<std::size_t>(s - 1)] =
        eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
  }
  return sch;
}

Matrix to_diffusion_space(const Matrix& one_hot_labels) {
  Matrix out(one_hot_labels.rows, one_hot_labels.cols);
  for (int i = 0; i < one_hot_labels.rows; ++i) {
    int ones = 0;
    for (int c = 0; c < one_hot_labels.cols; ++c) {
      const double v = one_hot_labels.at(i, c);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw ValidationError("to_diffusion_space: row " + std::to_string(i) +
                              " is not one-hot (entry " + std::to_string(v) + ")");
      }
      out.at(i, c) = 2.0 * v - 1.0;
    }
    if (ones != 1)
      throw ValidationError("to_diffusion_space: row " + std::to_string(i) + " has " +
                            std::to_string(ones) + " ones");
  }
  return out;
}

Matrix from_diffusion_space(const Matrix& state) {
  require_finite(state, "from_diffusion_space");
  Matrix out(state.rows, state.cols);
  for (int i = 0; i < state.rows; ++i) {
    double sum = 0.0;
    for (int c = 0; c < state.cols; ++c) {
      const double v = std::clamp((state.at(i, c) + 1.0) / 2.0, 0.0, 1.0);
      out.at(i, c) = v;
      sum += v;
    }
    if (sum == 0.0) {
      for (int c = 0; c < state.cols; ++c) out.at(i, c) = 1.0 / state.cols;
    } else {
      for (int c = 0; c < state.cols; ++c) out.at(i, c) /= sum;
    }
  }
  return out;
}

std::vector<int> make_skip_trajectory(int steps, int n_steps) {
  if (n_steps < 1 || n_steps > steps)
    throw ConfigError("make_skip_trajectory: n_steps " + std::to_string(n_steps) +
                      " outside [1, " + std::to_string(steps) + "]");
  std::vector<int> traj(static_cast<std::size_t>(n_steps) + 1);
  for (int k = 0; k <= n_steps; ++k) {
    const double exact = static_cast<double>(steps) * (n_steps - k) / n_steps;
    traj[static_cast<std::size_t>(k)] = static_cast<int>(std::llround(exact));
  }
  // Rounding can collapse neighbors when steps / n_steps is close to 1;
  // restore strict decrease without leaving [0, steps].
  for (int k = 1; k <= n_steps; ++k) {
    if (traj[static_cast<std::size_t>(k)] >= traj[static_cast<std::size_t>(k - 1)])
      traj[static_cast<std::size_t>(k)] = traj[static_cast<std::size_t>(k - 1)] - 1;
  }
  if (traj.back() != 0 || traj.front() != steps)
    throw ConfigError("make_skip_trajectory: could not build a strictly decreasing trajectory");
  return traj;
}

}  // namespace diffseg

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "diffseg/autodiff.hpp"
#include "diffseg/rng.hpp"

namespace diffseg {

/// Builds a 1x1 loss node on the given tape from the current parameter values.
/// Called repeatedly with perturbed values, so it must read the store each
/// time rather than capture stale matrices.
using LossBuilder = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckEntry {
  std::string name;
  int coords_checked = 0;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  int coords_checked = 0;
  bool pass = true;
  std::string to_string() const;
};

/// Compares the analytic gradient of `build` against central differences
/// (f(p+h) - f(p-h)) / (2h), coordinate by coordinate. When
/// max_coords_per_block > 0, that many coordinates are sampled per block with
/// `rng`; otherwise every coordinate is checked. Relative error uses
/// |a - f| / max(|a|, |f|, 1e-6). Throws if the loss evaluates non-finite.
GradCheckReport check_gradient(const LossBuilder& build, ParamStore& params, double h, double tol,
                               int max_coords_per_block = 0, Rng* rng = nullptr);

}  // namespace diffseg

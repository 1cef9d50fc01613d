// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "diffseg/autodiff.hpp"
#include "diffseg/masking.hpp"
#include "diffseg/matrix.hpp"

namespace diffseg {

struct LossWeights {
  double w_ce = 1.0;
  double w_smo = 1.0;
  double w_bd = 1.0;
  double w_aux = 1.0;
  double smo_clip = 4.0;    // truncation of |delta log p| before squaring
  double log_eps = 1e-8;    // stabilizer inside every logarithm

  void validate() const;
};

/// Frame-wise cross-entropy, normalized by L*C:
///   -(1 / (L*C)) * sum_i sum_c y0[i,c] * log(p[i,c] + eps).
Var loss_ce_g(Tape& t, Var p, const Matrix& y0_one_hot, double log_eps);

/// Mean squared adjacent-frame difference of log probabilities, each
/// |difference| truncated at `clip` (truncation saturates the gradient),
/// normalized by (L-1)*C. Defined as 0 for L < 2.
Var loss_smooth_g(Tape& t, Var p, double clip, double log_eps);

/// Binary cross-entropy between soft ground-truth boundaries and the
/// predicted boundary probability 1 - p[i] . p[i+1], averaged over gaps.
Var loss_boundary_g(Tape& t, Var p, const BoundarySoft& bsoft, double log_eps);

struct LossBreakdown {
  double ce = 0.0;
  double smo = 0.0;
  double bd = 0.0;
  double aux_ce = 0.0;
  double aux_smo = 0.0;
  double total = 0.0;
};

/// Weighted combination: w_ce*ce + w_smo*smo + w_bd*bd on the decoder output
/// plus w_aux * (ce + smo) on the encoder's auxiliary prediction.
Var loss_sum_g(Tape& t, Var p, Var aux, const Matrix& y0_one_hot, const BoundarySoft& bsoft,
               const LossWeights& w, LossBreakdown* breakdown = nullptr);

// Value-only conveniences for tests and diagnostics.
double loss_ce(const Matrix& p, const Matrix& y0_one_hot, double log_eps = 1e-8);
double loss_smooth(const Matrix& p, double clip = 4.0, double log_eps = 1e-8);
double loss_boundary(const Matrix& p, const BoundarySoft& bsoft, double log_eps = 1e-8);

}  // namespace diffseg

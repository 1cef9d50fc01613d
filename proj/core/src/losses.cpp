// SPDX-License-Identifier: Apache-2.0
#include "diffseg/losses.hpp"

#include <cmath>

#include "diffseg/errors.hpp"

namespace diffseg {

void LossWeights::validate() const {
  if (w_ce < 0 || w_smo < 0 || w_bd < 0 || w_aux < 0)
    throw ConfigError("losses: weights must be nonnegative");
  if (!(smo_clip > 0) || !std::isfinite(smo_clip))
    throw ConfigError("losses: smo_clip must be positive and finite");
  if (!(log_eps > 0)) throw ConfigError("losses: log_eps must be positive");
}

Var loss_ce_g(Tape& t, Var p, const Matrix& y0_one_hot, double log_eps) {
  require_same_shape(p.value(), y0_one_hot, "loss_ce");
  const int n = y0_one_hot.size();
  Var picked = t.mul(t.input(y0_one_hot), t.log_shift(p, log_eps));
  return t.scale(t.sum(picked), -1.0 / n);
}

Var loss_smooth_g(Tape& t, Var p, double clip, double log_eps) {
  const int len = p.rows();
  const int classes = p.cols();
  if (len < 2) return t.input(Matrix(1, 1));
  Var lp = t.log_shift(p, log_eps);
  Var diff = t.sub(t.slice_rows(lp, 0, len - 1), t.slice_rows(lp, 1, len));
  Var clipped = t.clamp_sg(diff, -clip, clip);
  return t.scale(t.sum(t.square(clipped)), 1.0 / ((len - 1) * classes));
}

Var loss_boundary_g(Tape& t, Var p, const BoundarySoft& bsoft, double log_eps) {
  const int len = p.rows();
  if (len < 2) throw ShapeError("loss_boundary: needs at least 2 frames");
  if (static_cast<int>(bsoft.values.size()) != len - 1)
    throw ShapeError("loss_boundary: " + std::to_string(bsoft.values.size()) + " gaps for " +
                     std::to_string(len) + " frames");

  Var dot = t.row_dot(t.slice_rows(p, 0, len - 1), t.slice_rows(p, 1, len));  // (L-1) x 1
  Var one_minus_dot = t.add_scalar(t.scale(dot, -1.0), 1.0);

  Matrix bbar(len - 1, 1);
  Matrix bbar_inv(len - 1, 1);
  for (int i = 0; i < len - 1; ++i) {
    bbar.at(i, 0) = bsoft.values[static_cast<std::size_t>(i)];
    bbar_inv.at(i, 0) = 1.0 - bbar.at(i, 0);
  }
  Var pos = t.mul(t.input(bbar), t.log_shift(one_minus_dot, log_eps));
  Var neg = t.mul(t.input(bbar_inv), t.log_shift(dot, log_eps));
  return t.scale(t.sum(t.add(pos, neg)), -1.0 / (len - 1));
}

Var loss_sum_g(Tape& t, Var p, Var aux, const Matrix& y0_one_hot, const BoundarySoft& bsoft,
               const LossWeights& w, LossBreakdown* breakdown) {
  w.validate();
  Var ce = loss_ce_g(t, p, y0_one_hot, w.log_eps);
  Var smo = loss_smooth_g(t, p, w.smo_clip, w.log_eps);
  Var bd = loss_boundary_g(t, p, bsoft, w.log_eps);
  Var aux_ce = loss_ce_g(t, aux, y0_one_hot, w.log_eps);
  Var aux_smo = loss_smooth_g(t, aux, w.smo_clip, w.log_eps);

  Var total = t.add(t.add(t.scale(ce, w.w_ce), t.scale(smo, w.w_smo)), t.scale(bd, w.w_bd));
  total = t.add(total, t.scale(t.add(aux_ce, aux_smo), w.w_aux));

  if (breakdown) {
    breakdown->ce = ce.value().data[0];
    breakdown->smo = smo.value().data[0];
    breakdown->bd = bd.value().data[0];
    breakdown->aux_ce = aux_ce.value().data[0];
    breakdown->aux_smo = aux_smo.value().data[0];
    breakdown->total = total.value().data[0];
  }
  return total;
}

double loss_ce(const Matrix& p, const Matrix& y0_one_hot, double log_eps) {
  Tape t;
  return loss_ce_g(t, t.input(p), y0_one_hot, log_eps).value().data[0];
}

double loss_smooth(const Matrix& p, double clip, double log_eps) {
  Tape t;
  return loss_smooth_g(t, t.input(p), clip, log_eps).value().data[0];
}

double loss_boundary(const Matrix& p, const BoundarySoft& bsoft, double log_eps) {
  Tape t;
  return loss_boundary_g(t, t.input(p), bsoft, log_eps).value().data[0];
}

}  // namespace diffseg

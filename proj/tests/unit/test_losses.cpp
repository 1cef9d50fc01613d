// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "diffseg/gradcheck.hpp"
#include "diffseg/losses.hpp"

using namespace diffseg;

namespace {

Matrix random_probs(Rng& rng, int rows, int cols) {
  Matrix logits(rows, cols);
  for (double& v : logits.data) v = rng.normal();
  Tape t;
  return t.softmax_rows(t.input(logits)).value();
}

BoundarySoft soft_for(const LabelSeq& labels, double std_dev = 1.0) {
  return soften_boundaries(hard_boundaries(labels), std_dev);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cross-entropy vanishes on a perfect prediction") {
  const LabelSeq labels{0, 2, 1, 1};
  const Matrix y = one_hot(labels, 3);
  CHECK(loss_ce(y, y) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cross-entropy of a uniform prediction is ln(C)/C") {
  const int classes = 4;
  const LabelSeq labels{0, 1, 2, 3, 0, 2};
  const Matrix y = one_hot(labels, classes);
  const Matrix p = Matrix::filled(static_cast<int>(labels.size()), classes, 0.25);
  CHECK(loss_ce(p, y) == doctest::Approx(std::log(4.0) / 4.0).epsilon(1e-6));
}

TEST_CASE("smoothness loss vanishes on constant predictions and degenerate lengths") {
  Rng rng(31);
  Matrix p(6, 3);
  const Matrix row = random_probs(rng, 1, 3);
  for (int i = 0; i < p.rows; ++i)
    for (int c = 0; c < p.cols; ++c) p.at(i, c) = row.at(0, c);
  CHECK(loss_smooth(p) == 0.0);
  CHECK(loss_smooth(random_probs(rng, 1, 3)) == 0.0);  // L = 1 defined as 0
}

TEST_CASE("smoothness loss reproduces a hand-computed log difference") {
  Matrix p(2, 1);
  p.at(0, 0) = std::exp(-1.0);
  p.at(1, 0) = std::exp(-2.0);
  CHECK(loss_smooth(p) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("smoothness truncation caps one jump at clip squared") {
  Matrix p(2, 1);
  p.at(0, 0) = 1.0;
  p.at(1, 0) = 1e-12;
  CHECK(loss_smooth(p, 4.0) == 16.0);
}

TEST_CASE("boundary loss vanishes for constant one-hot predictions") {
  const LabelSeq labels{1, 1, 1, 1};
  const Matrix p = one_hot(labels, 3);
  CHECK(loss_boundary(p, soft_for(labels)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("boundary loss reproduces -log(0.5) for a half-confident gap") {
  // One gap, true boundary strength 1, predicted dot product 0.5.
  Matrix p(2, 2);
  p.at(0, 0) = 1.0;
  p.at(1, 0) = 0.5;
  p.at(1, 1) = 0.5;
  BoundarySoft soft;
  soft.kernel_std = 1.0;
  soft.values = {1.0};
  CHECK(loss_boundary(p, soft) == doctest::Approx(-std::log(0.5)).epsilon(1e-6));
}

TEST_CASE("all three losses are nonnegative and finite on random inputs") {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const int len = rng.uniform_int(2, 30);
    const int classes = rng.uniform_int(2, 5);
    LabelSeq labels;
    for (int i = 0; i < len; ++i) labels.push_back(rng.uniform_int(0, classes - 1));
    const Matrix p = random_probs(rng, len, classes);
    const Matrix y = one_hot(labels, classes);
    const BoundarySoft soft = soft_for(labels);
    for (double v : {loss_ce(p, y), loss_smooth(p), loss_boundary(p, soft)}) {
      CHECK(v >= 0.0);
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("cross-entropy decreases under projected gradient steps") {
  Rng rng(33);
  const LabelSeq labels{0, 1, 2, 0, 1};
  const Matrix y = one_hot(labels, 3);
  Matrix p = random_probs(rng, 5, 3);
  double prev = loss_ce(p, y);
  for (int step = 0; step < 25; ++step) {
    ParamStore store;
    store.add("p", p);
    const auto build = [&y](Tape& t, const ParamStore& ps) {
      return loss_ce_g(t, t.param(ps, "p"), y, 1e-8);
    };
    store.zero_grads();
    Tape t;
    const Var loss = build(t, store);
    t.backward(loss);
    t.accumulate_param_grads(store);
    for (int i = 0; i < p.size(); ++i)
      p.data[i] = std::max(1e-6, p.data[i] - 0.05 * store.grad(0).data[i]);
    for (int i = 0; i < p.rows; ++i) {
      double sum = 0.0;
      for (int c = 0; c < p.cols; ++c) sum += p.at(i, c);
      for (int c = 0; c < p.cols; ++c) p.at(i, c) /= sum;
    }
    const double cur = loss_ce(p, y);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  // And the minimum over probability rows sits at p == y.
  CHECK(loss_ce(y, y) <= loss_ce(p, y));
}

TEST_CASE("boundary loss is invariant to a consistent class permutation") {
  Rng rng(34);
  const LabelSeq labels{0, 0, 1, 2, 2, 1};
  const Matrix p = random_probs(rng, 6, 3);
  Matrix permuted(6, 3);
  const int perm[3] = {2, 0, 1};
  for (int i = 0; i < 6; ++i)
    for (int c = 0; c < 3; ++c) permuted.at(i, perm[c]) = p.at(i, c);
  const BoundarySoft soft = soft_for(labels);  // label permutation keeps boundaries
  CHECK(loss_boundary(p, soft) == doctest::Approx(loss_boundary(permuted, soft)).epsilon(1e-12));
}

TEST_CASE("gradients of all three losses match finite differences") {
  Rng rng(35);
  const LabelSeq labels{0, 1, 1, 2, 0, 2, 2, 1};
  const Matrix y = one_hot(labels, 3);
  const BoundarySoft soft = soft_for(labels);

  ParamStore store;
  store.add("logits", rng.normal_matrix(8, 3));

  const auto ce = [&](Tape& t, const ParamStore& p) {
    return loss_ce_g(t, t.softmax_rows(t.param(p, "logits")), y, 1e-8);
  };
  const auto smo = [&](Tape& t, const ParamStore& p) {
    return loss_smooth_g(t, t.softmax_rows(t.param(p, "logits")), 4.0, 1e-8);
  };
  const auto bd = [&](Tape& t, const ParamStore& p) {
    return loss_boundary_g(t, t.softmax_rows(t.param(p, "logits")), soft, 1e-8);
  };
  for (const LossBuilder& build : {LossBuilder(ce), LossBuilder(smo), LossBuilder(bd)}) {
    const GradCheckReport report = check_gradient(build, store, 1e-5, 1e-6);
    INFO(report.to_string());
    CHECK(report.pass);
  }
}

TEST_CASE("combined loss composes its parts and honors the weights") {
  Rng rng(36);
  const LabelSeq labels{0, 1, 1, 2, 2, 2, 0};
  const Matrix y = one_hot(labels, 3);
  const BoundarySoft soft = soft_for(labels);
  const Matrix p = random_probs(rng, 7, 3);
  const Matrix aux = random_probs(rng, 7, 3);

  LossWeights zero;
  zero.w_ce = zero.w_smo = zero.w_bd = zero.w_aux = 0.0;
  Tape t0;
  CHECK(loss_sum_g(t0, t0.input(p), t0.input(aux), y, soft, zero).value().data[0] == 0.0);

  LossWeights ce_only;
  ce_only.w_ce = 1.0;
  ce_only.w_smo = ce_only.w_bd = ce_only.w_aux = 0.0;
  Tape t1;
  CHECK(loss_sum_g(t1, t1.input(p), t1.input(aux), y, soft, ce_only).value().data[0] ==
        doctest::Approx(loss_ce(p, y)).epsilon(1e-15));

  LossWeights w;
  w.w_ce = 0.7;
  w.w_smo = 1.3;
  w.w_bd = 0.4;
  w.w_aux = 2.0;
  LossBreakdown breakdown;
  Tape t2;
  const double total =
      loss_sum_g(t2, t2.input(p), t2.input(aux), y, soft, w, &breakdown).value().data[0];
  const double expected = 0.7 * loss_ce(p, y) + 1.3 * loss_smooth(p) + 0.4 * loss_boundary(p, soft) +
                          2.0 * (loss_ce(aux, y) + loss_smooth(aux));
  CHECK(total == doctest::Approx(expected).epsilon(1e-12));
  CHECK(breakdown.total == total);
  CHECK(breakdown.ce == doctest::Approx(loss_ce(p, y)).epsilon(1e-15));
  CHECK(breakdown.aux_smo == doctest::Approx(loss_smooth(aux)).epsilon(1e-15));
}

TEST_CASE("loss weights validate their ranges") {
  LossWeights w;
  w.w_ce = -1.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = LossWeights{};
  w.smo_clip = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = LossWeights{};
  w.log_eps = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

}  // TEST_SUITE

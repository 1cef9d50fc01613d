// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "diffseg/autodiff.hpp"
#include "diffseg/errors.hpp"
#include "diffseg/gradcheck.hpp"
#include "diffseg/rng.hpp"

using namespace diffseg;

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

// Scalarize a matrix output with fixed random weights so every output entry
// influences the loss with a distinct coefficient.
Var weighted_sum(Tape& t, Var x, std::uint64_t seed) {
  Rng rng(seed);
  Matrix w(x.rows(), x.cols());
  for (double& v : w.data) v = rng.normal();
  return t.sum(t.mul(x, t.input(w)));
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("matmul identity and hand arithmetic") {
  Rng rng(1);
  const Matrix x = random_matrix(rng, 2, 3);
  CHECK(max_abs_diff(matmul(Matrix::identity(2), x), x) == 0.0);

  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{1}, {1}});
  const Matrix prod = matmul(a, b);
  CHECK(prod.at(0, 0) == 3.0);
  CHECK(prod.at(1, 0) == 7.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  CHECK_THROWS_WITH_AS(matmul(Matrix(2, 3), Matrix(2, 3)),
                       doctest::Contains("2x3"), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  ParamStore store;
  Rng rng(7);
  store.add("a", random_matrix(rng, 3, 4));
  store.add("b", random_matrix(rng, 4, 2));
  const auto build = [](Tape& t, const ParamStore& p) {
    return weighted_sum(t, t.matmul(t.param(p, "a"), t.param(p, "b")), 99);
  };
  const GradCheckReport report = check_gradient(build, store, 1e-5, 1e-6);
  CHECK(report.pass);
  CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("conv1d centered identity tap projects by the center weight") {
  Rng rng(3);
  const int cin = 3, cout = 2, k = 3, len = 9;
  const Matrix x = random_matrix(rng, len, cin);
  const Matrix center = random_matrix(rng, cout, cin);
  Matrix kernel(cout, cin * k);
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci) kernel.at(co, ci * k + 1) = center.at(co, ci);

  Tape t;
  const Var out = t.conv1d(t.input(x), t.input(kernel), 2);
  Matrix expected(len, cout);
  for (int i = 0; i < len; ++i)
    for (int co = 0; co < cout; ++co)
      for (int ci = 0; ci < cin; ++ci) expected.at(i, co) += x.at(i, ci) * center.at(co, ci);
  CHECK(max_abs_diff(out.value(), expected) < 1e-15);
}

TEST_CASE("conv1d zero input gives zero output") {
  Rng rng(4);
  Tape t;
  const Var out = t.conv1d(t.input(Matrix(12, 3)), t.input(random_matrix(rng, 5, 9)), 1);
  CHECK(max_abs(out.value()) == 0.0);
}

TEST_CASE("conv1d rejects even kernel width and bad dilation") {
  Tape t;
  const Var x = t.input(Matrix(8, 2));
  CHECK_THROWS_AS(t.conv1d(x, t.input(Matrix(4, 8)), 1), ConfigError);   // k = 4
  CHECK_THROWS_AS(t.conv1d(x, t.input(Matrix(4, 6)), 0), ConfigError);   // dilation 0
  CHECK_THROWS_AS(t.conv1d(x, t.input(Matrix(4, 7)), 1), ShapeError);    // not divisible
}

TEST_CASE("conv1d gradient matches finite differences") {
  ParamStore store;
  Rng rng(11);
  store.add("x", random_matrix(rng, 16, 3));
  store.add("w", random_matrix(rng, 4, 9));
  const auto build = [](Tape& t, const ParamStore& p) {
    return t.sum(t.conv1d(t.param(p, "x"), t.param(p, "w"), 2));
  };
  const GradCheckReport report = check_gradient(build, store, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("conv1d is length-preserving for all L >= 1") {
  Rng rng(5);
  const Matrix kernel = random_matrix(rng, 4, 6);
  for (int len : {1, 2, 3, 5, 16, 37}) {
    Tape t;
    const Var out = t.conv1d(t.input(random_matrix(rng, len, 2)), t.input(kernel), 4);
    CHECK(out.rows() == len);
    CHECK(out.cols() == 4);
  }
}

TEST_CASE("conv1d is shift-equivariant in the interior") {
  Rng rng(6);
  const int len = 32, cin = 2, dilation = 3, k = 3;
  const int radius = dilation * (k - 1) / 2;
  const Matrix x = random_matrix(rng, len, cin);
  Matrix shifted(len, cin);
  for (int i = 1; i < len; ++i)
    for (int c = 0; c < cin; ++c) shifted.at(i, c) = x.at(i - 1, c);
  const Matrix kernel = random_matrix(rng, 3, cin * k);

  Tape t;
  const Matrix out = t.conv1d(t.input(x), t.input(kernel), dilation).value();
  const Matrix out_shifted = t.conv1d(t.input(shifted), t.input(kernel), dilation).value();
  for (int i = radius + 1; i < len - radius; ++i)
    for (int c = 0; c < 3; ++c)
      CHECK(out_shifted.at(i, c) == doctest::Approx(out.at(i - 1, c)).epsilon(1e-12));
}

TEST_CASE("softmax rows: symmetry, stability, normalization") {
  Tape t;
  const Matrix uniform = t.softmax_rows(t.input(Matrix::filled(2, 4, 3.7))).value();
  for (int c = 0; c < 4; ++c) CHECK(uniform.at(0, c) == doctest::Approx(0.25).epsilon(1e-14));

  const Matrix hot = t.softmax_rows(t.input(Matrix::from_rows({{1000.0, 0.0}}))).value();
  CHECK(hot.all_finite());
  CHECK(hot.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hot.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(8);
  const Matrix probs = t.softmax_rows(t.input(random_matrix(rng, 7, 5, 3.0))).value();
  for (int i = 0; i < probs.rows; ++i) {
    double sum = 0.0;
    for (int c = 0; c < probs.cols; ++c) sum += probs.at(i, c);
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax rows invariant to adding a row constant") {
  Rng rng(9);
  const Matrix x = random_matrix(rng, 4, 5);
  Matrix x_shifted = x;
  for (int i = 0; i < x.rows; ++i)
    for (int c = 0; c < x.cols; ++c) x_shifted.at(i, c) += 0.37 * (i + 1);
  Tape t;
  const Matrix a = t.softmax_rows(t.input(x)).value();
  const Matrix b = t.softmax_rows(t.input(x_shifted)).value();
  CHECK(max_abs_diff(a, b) <= 1e-12);
}

TEST_CASE("softmax gradient matches finite differences") {
  ParamStore store;
  Rng rng(10);
  store.add("x", random_matrix(rng, 5, 4));
  const auto build = [](Tape& t, const ParamStore& p) {
    return weighted_sum(t, t.softmax_rows(t.param(p, "x")), 123);
  };
  const GradCheckReport report = check_gradient(build, store, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("check_gradient on a quadratic is exact to 1e-9") {
  ParamStore store;
  Rng rng(12);
  store.add("p", random_matrix(rng, 3, 3));
  const auto build = [](Tape& t, const ParamStore& p) {
    const Var x = t.param(p, "p");
    return t.sum(t.square(x));
  };
  const GradCheckReport report = check_gradient(build, store, 1e-5, 1e-9);
  CHECK(report.pass);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("check_gradient reports zero gradient for a constant function") {
  ParamStore store;
  store.add("p", Matrix::filled(2, 2, 0.5));
  const auto build = [](Tape& t, const ParamStore&) { return t.input(Matrix::filled(1, 1, 4.2)); };
  const GradCheckReport report = check_gradient(build, store, 1e-5, 1e-10);
  CHECK(report.pass);
  for (int i = 0; i < store.grad(0).size(); ++i) CHECK(store.grad(0).data[i] == 0.0);
}

TEST_CASE("check_gradient rejects non-finite losses") {
  ParamStore store;
  store.add("p", Matrix::filled(1, 1, 1.0));
  const auto build = [](Tape& t, const ParamStore&) {
    return t.input(Matrix::filled(1, 1, std::numeric_limits<double>::infinity()));
  };
  CHECK_THROWS_AS(check_gradient(build, store, 1e-5, 1e-4), ValidationError);
}

TEST_CASE("reused nodes accumulate gradients once per path") {
  // Diamond graph: f = sum(x * x) + sum(3 x); analytic gradient 2x + 3.
  ParamStore store;
  Rng rng(13);
  store.add("x", random_matrix(rng, 2, 3));
  const auto build = [](Tape& t, const ParamStore& p) {
    const Var x = t.param(p, "x");
    return t.add(t.sum(t.mul(x, x)), t.sum(t.scale(x, 3.0)));
  };
  store.zero_grads();
  Tape t;
  const Var loss = build(t, store);
  t.backward(loss);
  t.accumulate_param_grads(store);
  for (int i = 0; i < store.value(0).size(); ++i)
    CHECK(store.grad(0).data[i] ==
          doctest::Approx(2.0 * store.value(0).data[i] + 3.0).epsilon(1e-12));
}

TEST_CASE("every differentiable op passes gradient checks on 20 random instances") {
  struct Scenario {
    const char* name;
    LossBuilder build;
  };
  const std::vector<Scenario> scenarios = {
      {"matmul",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.matmul(t.param(p, "a"), t.param(p, "b")), 1);
       }},
      {"conv1d",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.conv1d(t.param(p, "x6"), t.param(p, "w"), 2), 2);
       }},
      {"add_sub_mul",
       [](Tape& t, const ParamStore& p) {
         const Var a = t.param(p, "a6");
         const Var b = t.param(p, "b6");
         return weighted_sum(t, t.mul(t.add(a, b), t.sub(a, b)), 3);
       }},
      {"scale_add_scalar",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.add_scalar(t.scale(t.param(p, "a6"), -1.7), 0.3), 4);
       }},
      {"relu",
       [](Tape& t, const ParamStore& p) { return weighted_sum(t, t.relu(t.param(p, "a6")), 5); }},
      {"square",
       [](Tape& t, const ParamStore& p) { return weighted_sum(t, t.square(t.param(p, "a6")), 6); }},
      {"log_shift_of_softmax",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.log_shift(t.softmax_rows(t.param(p, "a6")), 1e-8), 7);
       }},
      {"clamp_sg",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.clamp_sg(t.param(p, "a6"), -0.8, 0.8), 8);
       }},
      {"add_row",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.add_row(t.param(p, "a6"), t.param(p, "row")), 9);
       }},
      {"scale_rows",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.scale_rows(t.param(p, "a6"), {0.0, 1.0, 0.5, 2.0, 1.0, 0.0}), 10);
       }},
      {"softmax_rows",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.softmax_rows(t.param(p, "a6")), 11);
       }},
      {"reductions",
       [](Tape& t, const ParamStore& p) {
         return t.add(t.sum(t.param(p, "a6")), t.mean_all(t.square(t.param(p, "b6"))));
       }},
      {"row_dot",
       [](Tape& t, const ParamStore& p) {
         return weighted_sum(t, t.row_dot(t.param(p, "a6"), t.param(p, "b6")), 12);
       }},
      {"concat_slice",
       [](Tape& t, const ParamStore& p) {
         const Var cat = t.concat_cols(t.param(p, "a6"), t.param(p, "b6"));
         return weighted_sum(t, t.slice_rows(t.slice_cols(cat, 1, 7), 1, 5), 13);
       }},
  };

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ParamStore store;
    Rng rng(seed);
    store.add("a", random_matrix(rng, 3, 4));
    store.add("b", random_matrix(rng, 4, 2));
    store.add("x6", random_matrix(rng, 6, 3));
    store.add("w", random_matrix(rng, 2, 9));
    store.add("a6", random_matrix(rng, 6, 4));
    store.add("b6", random_matrix(rng, 6, 4));
    store.add("row", random_matrix(rng, 1, 4));
    for (const Scenario& s : scenarios) {
      const GradCheckReport report = check_gradient(s.build, store, 1e-5, 1e-4);
      INFO("op ", s.name, " seed ", seed, "\n", report.to_string());
      CHECK(report.pass);
    }
  }
}

TEST_CASE("backward demands a scalar loss and runs once") {
  Tape t;
  const Var x = t.input(Matrix::filled(2, 2, 1.0));
  CHECK_THROWS_AS(t.backward(x), ShapeError);
  const Var s = t.sum(x);
  t.backward(s);
  CHECK_THROWS_AS(t.backward(s), Error);
}

}  // TEST_SUITE

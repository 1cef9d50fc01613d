// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "diffseg/errors.hpp"
#include "diffseg/schedule.hpp"

using namespace diffseg;

TEST_SUITE("schedule") {

TEST_CASE("cumulative product for a flat two-step schedule") {
  const NoiseSchedule sch = make_linear_schedule(2, 0.5, 0.5, 1.0);
  CHECK(sch.alpha_bar[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sch.alpha_bar[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sch.alpha_bar_at(0) == 1.0);
}

TEST_CASE("eta zero makes the sampler deterministic") {
  const NoiseSchedule sch = make_linear_schedule(50, 1e-4, 0.02, 0.0);
  for (double s : sch.sigma) CHECK(s == 0.0);
}

TEST_CASE("default schedule drives alpha_bar near zero") {
  const NoiseSchedule sch = make_linear_schedule(1000, 1e-4, 0.02, 1.0);
  CHECK(sch.alpha_bar_at(1000) < 5e-5);
  CHECK(sch.alpha_bar_at(1000) > 0.0);
}

TEST_CASE("alpha_bar is strictly decreasing and recomputable from beta") {
  const NoiseSchedule sch = make_linear_schedule(1000, 1e-4, 0.02, 1.0);
  double running = 1.0;
  for (int s = 1; s <= sch.steps; ++s) {
    running *= 1.0 - sch.beta[static_cast<std::size_t>(s - 1)];
    CHECK(std::fabs(running - sch.alpha_bar_at(s)) <= 1e-12);
    CHECK(sch.alpha_bar_at(s) < sch.alpha_bar_at(s - 1));
  }
}

TEST_CASE("sigma stays below the reverse-update budget at eta one") {
  const NoiseSchedule sch = make_linear_schedule(1000, 1e-4, 0.02, 1.0);
  for (int s = 1; s <= sch.steps; ++s) {
    const double sig = sch.sigma_at(s);
    CHECK(sig >= 0.0);
    CHECK(sig * sig <= 1.0 - sch.alpha_bar_at(s - 1) + 1e-15);
  }
}

TEST_CASE("schedule rejects invalid ranges") {
  CHECK_THROWS_AS(make_linear_schedule(0, 1e-4, 0.02, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(10, 0.0, 0.02, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(10, 0.03, 0.02, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(10, 1e-4, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear_schedule(10, 1e-4, 0.02, -0.1), ConfigError);
}

TEST_CASE("one-hot maps to signed space and back") {
  const Matrix y = Matrix::from_rows({{0, 1, 0}, {1, 0, 0}});
  const Matrix signed_y = to_diffusion_space(y);
  CHECK(signed_y.at(0, 0) == -1.0);
  CHECK(signed_y.at(0, 1) == 1.0);
  CHECK(signed_y.at(0, 2) == -1.0);
  CHECK(max_abs_diff(from_diffusion_space(signed_y), y) == 0.0);
}

TEST_CASE("all-class-zero sequence maps to +1 in the first column") {
  const Matrix y = one_hot(LabelSeq{0, 0, 0}, 4);
  const Matrix signed_y = to_diffusion_space(y);
  for (int i = 0; i < 3; ++i) {
    CHECK(signed_y.at(i, 0) == 1.0);
    for (int c = 1; c < 4; ++c) CHECK(signed_y.at(i, c) == -1.0);
  }
}

TEST_CASE("to_diffusion_space rejects non-one-hot rows") {
  CHECK_THROWS_AS(to_diffusion_space(Matrix::from_rows({{0.5, 0.5}})), ValidationError);
  CHECK_THROWS_AS(to_diffusion_space(Matrix::from_rows({{1, 1}})), ValidationError);
  CHECK_THROWS_AS(to_diffusion_space(Matrix::from_rows({{0, 0}})), ValidationError);
}

TEST_CASE("from_diffusion_space clips and renormalizes") {
  const Matrix a = from_diffusion_space(Matrix::from_rows({{-1, 1, -1}}));
  CHECK(a.at(0, 0) == 0.0);
  CHECK(a.at(0, 1) == 1.0);
  CHECK(a.at(0, 2) == 0.0);

  const Matrix b = from_diffusion_space(Matrix::from_rows({{0, 0}}));
  CHECK(b.at(0, 0) == doctest::Approx(0.5));
  CHECK(b.at(0, 1) == doctest::Approx(0.5));

  const Matrix c = from_diffusion_space(Matrix::from_rows({{3, -3}}));
  CHECK(c.at(0, 0) == 1.0);
  CHECK(c.at(0, 1) == 0.0);

  // Rows that clip to all zeros become uniform.
  const Matrix d = from_diffusion_space(Matrix::from_rows({{-2, -5, -1}}));
  for (int i = 0; i < 3; ++i) CHECK(d.at(0, i) == doctest::Approx(1.0 / 3));
}

TEST_CASE("skip trajectory endpoints, spacing and degenerate forms") {
  const std::vector<int> t25 = make_skip_trajectory(1000, 25);
  CHECK(t25.size() == 26);
  CHECK(t25.front() == 1000);
  CHECK(t25.back() == 0);
  for (std::size_t i = 1; i < t25.size(); ++i) CHECK(t25[i] < t25[i - 1]);

  CHECK(make_skip_trajectory(4, 4) == std::vector<int>{4, 3, 2, 1, 0});
  CHECK(make_skip_trajectory(1000, 1) == std::vector<int>{1000, 0});

  CHECK_THROWS_AS(make_skip_trajectory(10, 0), ConfigError);
  CHECK_THROWS_AS(make_skip_trajectory(10, 11), ConfigError);
}

TEST_CASE("skip trajectory is strictly decreasing for awkward ratios") {
  for (int steps : {7, 10, 13, 100}) {
    for (int n = 1; n <= steps; ++n) {
      const std::vector<int> traj = make_skip_trajectory(steps, n);
      CHECK(traj.front() == steps);
      CHECK(traj.back() == 0);
      for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i] < traj[i - 1]);
    }
  }
}

}  // TEST_SUITE

// SPDX-License-Identifier: Apache-2.0
#include "diffseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "diffseg/errors.hpp"

namespace diffseg {

namespace {

double eval_scalar(const LossBuilder& build, const ParamStore& params) {
  Tape tape;
  const Var loss = build(tape, params);
  const Matrix& v = loss.value();
  if (v.rows != 1 || v.cols != 1)
    throw ShapeError("check_gradient: loss must be 1x1, got " + v.shape_str());
  const double f = v.data[0];
  if (!std::isfinite(f)) throw ValidationError("check_gradient: loss evaluated non-finite");
  return f;
}

double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << (e.pass ? "  ok   " : "  FAIL ") << e.name << "  coords=" << e.coords_checked
       << "  max_rel_err=" << e.max_rel_err << "\n";
  }
  os << (pass ? "PASS" : "FAIL") << "  overall max_rel_err=" << max_rel_err
     << " over " << coords_checked << " coordinates\n";
  return os.str();
}

GradCheckReport check_gradient(const LossBuilder& build, ParamStore& params, double h, double tol,
                               int max_coords_per_block, Rng* rng) {
  if (h <= 0.0) throw ConfigError("check_gradient: h must be positive");
  if (max_coords_per_block > 0 && rng == nullptr)
    throw ConfigError("check_gradient: coordinate sampling needs an rng");

  // Analytic pass.
  params.zero_grads();
  {
    Tape tape;
    const Var loss = build(tape, params);
    const Matrix& v = loss.value();
    if (v.rows != 1 || v.cols != 1)
      throw ShapeError("check_gradient: loss must be 1x1, got " + v.shape_str());
    if (!std::isfinite(v.data[0]))
      throw ValidationError("check_gradient: loss evaluated non-finite");
    tape.backward(loss);
    tape.accumulate_param_grads(params);
  }

  GradCheckReport report;
  for (int b = 0; b < params.count(); ++b) {
    GradCheckEntry entry;
    entry.name = params.name(b);
    const int n = params.value(b).size();

    std::vector<int> coords;
    if (max_coords_per_block > 0 && max_coords_per_block < n) {
      for (int i = 0; i < max_coords_per_block; ++i) coords.push_back(rng->uniform_int(0, n - 1));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    } else {
      coords.resize(static_cast<std::size_t>(n));
      std::iota(coords.begin(), coords.end(), 0);
    }

    for (int c : coords) {
      double& p = params.value(b).data[static_cast<std::size_t>(c)];
      const double saved = p;
      p = saved + h;
      const double fp = eval_scalar(build, params);
      p = saved - h;
      const double fm = eval_scalar(build, params);
      p = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = params.grad(b).data[static_cast<std::size_t>(c)];
      entry.max_rel_err = std::max(entry.max_rel_err, rel_err(analytic, numeric));
      ++entry.coords_checked;
    }

    entry.pass = entry.max_rel_err <= tol;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.coords_checked += entry.coords_checked;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace diffseg

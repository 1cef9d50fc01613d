// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "diffseg/errors.hpp"

namespace diffseg {

/// Dense row-major matrix of 64-bit reals. The only storage type used by the
/// model, the sampler, and the losses. L x D feature blocks, L x C label and
/// probability blocks, and parameter tensors all live here.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix filled(int r, int c, double v);
  static Matrix identity(int n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "3x4"
};

// Plain (non-differentiated) arithmetic used by the sampler and data paths.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix axpby(double alpha, const Matrix& a, double beta, const Matrix& b);  // alpha*a + beta*b

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

/// Frame-wise integer labels for one video.
using LabelSeq = std::vector<int>;

/// L x C one-hot matrix from integer labels. Labels must be in [0, num_classes).
Matrix one_hot(const LabelSeq& labels, int num_classes);

/// Row-wise argmax; ties break toward the lowest class index.
LabelSeq argmax_rows(const Matrix& m);

}  // namespace diffseg

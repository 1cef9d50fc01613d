// SPDX-License-Identifier: Apache-2.0
#include "diffseg/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace diffseg {

Matrix Matrix::filled(int r, int c, double v) {
  Matrix m(r, c);
  std::fill(m.data.begin(), m.data.end(), v);
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<int>(rows.size()), rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
  int r = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != m.cols)
      throw ShapeError("from_rows: ragged initializer at row " + std::to_string(r));
    int c = 0;
    for (double v : row) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " * " + b.shape_str());
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      double* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  for (int i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a;
  for (int i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data) v *= s;
  return out;
}

Matrix axpby(double alpha, const Matrix& a, double beta, const Matrix& b) {
  require_same_shape(a, b, "axpby");
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < out.size(); ++i) out.data[i] = alpha * a.data[i] + beta * b.data[i];
  return out;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::fabs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.all_finite())
    throw ValidationError(std::string(what) + ": non-finite value in " + m.shape_str() + " matrix");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Matrix one_hot(const LabelSeq& labels, int num_classes) {
  Matrix m(static_cast<int>(labels.size()), num_classes);
  for (int i = 0; i < m.rows; ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes)
      throw ValidationError("one_hot: label " + std::to_string(c) + " out of range at frame " +
                            std::to_string(i));
    m.at(i, c) = 1.0;
  }
  return m;
}

LabelSeq argmax_rows(const Matrix& m) {
  LabelSeq out(m.rows, 0);
  for (int i = 0; i < m.rows; ++i) {
    double best = m.at(i, 0);
    int arg = 0;
    for (int c = 1; c < m.cols; ++c) {
      if (m.at(i, c) > best) {
        best = m.at(i, c);
        arg = c;
      }
    }
    out[i] = arg;
  }
  return out;
}

}  // namespace diffseg

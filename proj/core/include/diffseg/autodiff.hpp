// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffseg/matrix.hpp"

namespace diffseg {

/// Named trainable parameter blocks with matching gradient buffers.
/// Iteration order is insertion order, which fixes the reduction order of
/// every optimizer update and keeps runs bit-reproducible.
class ParamStore {
 public:
  int add(const std::string& name, Matrix init);
  int index_of(const std::string& name) const;  // -1 if absent
  bool has(const std::string& name) const { return index_of(name) >= 0; }
  int count() const { return static_cast<int>(values_.size()); }

  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  Matrix& value(int i) { return values_[static_cast<std::size_t>(i)]; }
  const Matrix& value(int i) const { return values_[static_cast<std::size_t>(i)]; }
  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  Matrix& grad(int i) { return grads_[static_cast<std::size_t>(i)]; }
  const Matrix& grad(int i) const { return grads_[static_cast<std::size_t>(i)]; }

  void zero_grads();
  /// Total number of scalar parameters.
  long long scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
  std::vector<Matrix> values_;
  std::vector<Matrix> grads_;
};

class Tape;

/// Handle to a node in a Tape. Values are computed eagerly when the op is
/// recorded; gradients become available after Tape::backward.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  const Matrix& grad() const;
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }

 private:
  friend class Tape;
  Var(Tape* t, int i) : tape_(t), index_(i) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Reverse-mode tape over a fixed op vocabulary: matmul, dilated conv,
/// elementwise maps, softmax, reductions, concat and slice. Nodes are created
/// in topological order, so one reverse sweep visits each node exactly once.
class Tape {
 public:
  // Leaves
  Var input(Matrix value);
  Var param(const ParamStore& store, int index);
  Var param(const ParamStore& store, const std::string& name);

  // Linear algebra
  Var matmul(Var a, Var b);
  /// Dilated temporal convolution. x is L x Cin, kernel is Cout x (Cin * k)
  /// with taps at kernel(co, ci * k + t). k is inferred from the shapes and
  /// must be odd; output length equals input length via symmetric zero
  /// padding of width dilation * (k - 1) / 2.
  Var conv1d(Var x, Var kernel, int dilation);

  // Elementwise
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var relu(Var a);
  Var square(Var a);
  /// log(min(x + eps, 1)); the clamp keeps cross-entropy style losses
  /// nonnegative and zeroes the gradient in the saturated region.
  Var log_shift(Var a, double eps);
  /// Clamp values to [lo, hi]; saturation blocks the gradient.
  Var clamp_sg(Var a, double lo, double hi);

  // Broadcasts
  /// x is L x C, row is 1 x C; adds row to every row of x.
  Var add_row(Var x, Var row);
  /// Multiplies row i of x by weights[i]; weights carry no gradient.
  Var scale_rows(Var x, std::vector<double> weights);

  // Softmax and reductions
  Var softmax_rows(Var x);
  Var sum(Var x);       // 1x1
  Var mean_all(Var x);  // 1x1
  /// Per-row dot product of two equally shaped matrices; output is L x 1.
  Var row_dot(Var a, Var b);

  // Shape ops
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, int c0, int c1);  // half-open [c0, c1)
  Var slice_rows(Var x, int r0, int r1);

  /// Reverse sweep from a 1x1 loss node. May be called once per tape.
  void backward(Var loss);
  /// Adds the gradients of parameter leaves into their store buffers.
  void accumulate_param_grads(ParamStore& store) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    int binding = -1;  // ParamStore index for parameter leaves
    bool reachable = false;
    std::vector<int> parents;
    std::function<void(Tape&, int)> backprop;  // accumulates into parent grads
  };

  int push(Matrix value, std::vector<int> parents, std::function<void(Tape&, int)> backprop);
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Matrix& grad_of(int i) { return nodes_[static_cast<std::size_t>(i)].grad; }
  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace diffseg

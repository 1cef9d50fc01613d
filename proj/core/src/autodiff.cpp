// SPDX-License-Identifier: Apache-2.0
#include "diffseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace diffseg {

int ParamStore::add(const std::string& name, Matrix init) {
  if (has(name)) throw ConfigError("ParamStore::add: duplicate parameter name '" + name + "'");
  require_finite(init, "ParamStore::add");
  const int idx = count();
  names_.push_back(name);
  index_[name] = idx;
  grads_.emplace_back(init.rows, init.cols);
  values_.push_back(std::move(init));
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

Matrix& ParamStore::value(const std::string& name) {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  return value(i);
}

const Matrix& ParamStore::value(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  return value(i);
}

void ParamStore::zero_grads() {
  for (Matrix& g : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
}

long long ParamStore::scalar_count() const {
  long long n = 0;
  for (const Matrix& v : values_) n += v.size();
  return n;
}

const Matrix& Var::value() const {
  if (!valid()) throw Error("Var::value: default-constructed handle");
  return tape_->node(index_).value;
}

const Matrix& Var::grad() const {
  if (!valid()) throw Error("Var::grad: default-constructed handle");
  const Matrix& g = tape_->node(index_).grad;
  if (g.rows == 0) throw Error("Var::grad: backward() has not touched this node");
  return g;
}

int Tape::push(Matrix value, std::vector<int> parents, std::function<void(Tape&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_owned(Var v, const char* what) const {
  if (!v.valid() || v.tape_ != this)
    throw Error(std::string(what) + ": Var does not belong to this tape");
}

Var Tape::input(Matrix value) {
  return Var(this, push(std::move(value), {}, nullptr));
}

Var Tape::param(const ParamStore& store, int index) {
  const int id = push(store.value(index), {}, nullptr);
  nodes_.back().binding = index;
  return Var(this, id);
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  const int i = store.index_of(name);
  if (i < 0) throw ConfigError("Tape::param: unknown parameter '" + name + "'");
  return param(store, i);
}

Var Tape::matmul(Var a, Var b) {
  check_owned(a, "matmul");
  check_owned(b, "matmul");
  const int ia = a.index_, ib = b.index_;
  Matrix out = diffseg::matmul(a.value(), b.value());
  const int id = push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    const Matrix& bv = t.node(ib).value;
    Matrix& ga = t.grad_of(ia);
    Matrix& gb = t.grad_of(ib);
    // ga += g * b^T
    for (int i = 0; i < av.rows; ++i)
      for (int j = 0; j < bv.cols; ++j) {
        const double gij = g.at(i, j);
        if (gij == 0.0) continue;
        for (int k = 0; k < av.cols; ++k) ga.at(i, k) += gij * bv.at(k, j);
      }
    // gb += a^T * g
    for (int i = 0; i < av.rows; ++i)
      for (int k = 0; k < av.cols; ++k) {
        const double aik = av.at(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < bv.cols; ++j) gb.at(k, j) += aik * g.at(i, j);
      }
  });
  return Var(this, id);
}

Var Tape::conv1d(Var x, Var kernel, int dilation) {
  check_owned(x, "conv1d");
  check_owned(kernel, "conv1d");
  const Matrix& xv = x.value();
  const Matrix& wv = kernel.value();
  const int cin = xv.cols;
  if (cin <= 0 || wv.cols % cin != 0)
    throw ShapeError("conv1d: kernel " + wv.shape_str() + " incompatible with input " +
                     xv.shape_str());
  const int k = wv.cols / cin;
  if (k % 2 == 0) throw ConfigError("conv1d: kernel width " + std::to_string(k) + " must be odd");
  if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
  const int cout = wv.rows;
  const int len = xv.rows;
  const int half = k / 2;

  Matrix out(len, cout);
  for (int i = 0; i < len; ++i) {
    for (int t = 0; t < k; ++t) {
      const int j = i + (t - half) * dilation;
      if (j < 0 || j >= len) continue;  // zero padding
      const double* xrow = &xv.data[static_cast<std::size_t>(j) * cin];
      for (int co = 0; co < cout; ++co) {
        const double* wrow = &wv.data[static_cast<std::size_t>(co) * wv.cols];
        double acc = 0.0;
        for (int ci = 0; ci < cin; ++ci) acc += wrow[ci * k + t] * xrow[ci];
        out.at(i, co) += acc;
      }
    }
  }

  const int ix = x.index_, iw = kernel.index_;
  const int id = push(std::move(out), {ix, iw}, [ix, iw, k, dilation](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& xv2 = t.node(ix).value;
    const Matrix& wv2 = t.node(iw).value;
    Matrix& gx = t.grad_of(ix);
    Matrix& gw = t.grad_of(iw);
    const int len = xv2.rows, cin = xv2.cols, cout = wv2.rows, half = k / 2;
    for (int i = 0; i < len; ++i) {
      for (int tt = 0; tt < k; ++tt) {
        const int j = i + (tt - half) * dilation;
        if (j < 0 || j >= len) continue;
        const double* xrow = &xv2.data[static_cast<std::size_t>(j) * cin];
        double* gxrow = &gx.data[static_cast<std::size_t>(j) * cin];
        for (int co = 0; co < cout; ++co) {
          const double gio = g.at(i, co);
          if (gio == 0.0) continue;
          const double* wrow = &wv2.data[static_cast<std::size_t>(co) * wv2.cols];
          double* gwrow = &gw.data[static_cast<std::size_t>(co) * gw.cols];
          for (int ci = 0; ci < cin; ++ci) {
            gxrow[ci] += gio * wrow[ci * k + tt];
            gwrow[ci * k + tt] += gio * xrow[ci];
          }
        }
      }
    }
  });
  return Var(this, id);
}

Var Tape::add(Var a, Var b) {
  check_owned(a, "add");
  check_owned(b, "add");
  require_same_shape(a.value(), b.value(), "add");
  const int ia = a.index_, ib = b.index_;
  const int id = push(diffseg::add(a.value(), b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.grad_of(ia);
    Matrix& gb = t.grad_of(ib);
    for (int i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  });
  return Var(this, id);
}

Var Tape::sub(Var a, Var b) {
  check_owned(a, "sub");
  check_owned(b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  const int ia = a.index_, ib = b.index_;
  const int id = push(diffseg::sub(a.value(), b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.grad_of(ia);
    Matrix& gb = t.grad_of(ib);
    for (int i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  });
  return Var(this, id);
}

Var Tape::mul(Var a, Var b) {
  check_owned(a, "mul");
  check_owned(b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  const int ia = a.index_, ib = b.index_;
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * b.value().data[i];
  const int id = push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    const Matrix& bv = t.node(ib).value;
    Matrix& ga = t.grad_of(ia);
    Matrix& gb = t.grad_of(ib);
    for (int i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * bv.data[i];
      gb.data[i] += g.data[i] * av.data[i];
    }
  });
  return Var(this, id);
}

Var Tape::scale(Var a, double s) {
  check_owned(a, "scale");
  const int ia = a.index_;
  const int id = push(diffseg::scale(a.value(), s), {ia}, [ia, s](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.grad_of(ia);
    for (int i = 0; i < g.size(); ++i) ga.data[i] += s * g.data[i];
  });
  return Var(this, id);
}

Var Tape::add_scalar(Var a, double s) {
  check_owned(a, "add_scalar");
  const int ia = a.index_;
  Matrix out = a.value();
  for (double& v : out.data) v += s;
  const int id = push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.grad_of(ia);
    for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
  });
  return Var(this, id);
}

Var Tape::relu(Var a) {
  check_owned(a, "relu");
  const int ia = a.index_;
  Matrix out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const int id = push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    Matrix& ga = t.grad_of(ia);
    for (int i = 0; i < g.size(); ++i)
      if (av.data[i] > 0.0) ga.data[i] += g.data[i];
  });
  return Var(this, id);
}

Var Tape::square(Var a) {
  check_owned(a, "square");
  const int ia = a.index_;
  Matrix out = a.value();
  for (double& v : out.data) v *= v;
  const int id = push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    Matrix& ga = t.grad_of(ia);
    for (int i = 0; i < g.size(); ++i) ga.data[i] += 2.0 * av.data[i] * g.data[i];
  });
  return Var(this, id);
}

Var Tape::log_shift(Var a, double eps) {
  check_owned(a, "log_shift");
  if (eps <= 0.0) throw ConfigError("log_shift: eps must be positive");
  const int ia = a.index_;
  Matrix out = a.value();
  for (double& v : out.data) v = std::log(std::min(v + eps, 1.0));
  const int id = push(std::move(out), {ia}, [ia, eps](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    Matrix& ga = t.grad_of(ia);
    for (int i = 0; i < g.size(); ++i) {
      const double shifted = av.data[i] + eps;
      if (shifted < 1.0) ga.data[i] += g.data[i] / shifted;
    }
  });
  return Var(this, id);
}

Var Tape::clamp_sg(Var a, double lo, double hi) {
  check_owned(a, "clamp_sg");
  if (lo > hi) throw ConfigError("clamp_sg: lo > hi");
  const int ia = a.index_;
  Matrix out = a.value();
  for (double& v : out.data) v = std::clamp(v, lo, hi);
  const int id = push(std::move(out), {ia}, [ia, lo, hi](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    Matrix& ga = t.grad_of(ia);
    for (int i = 0; i < g.size(); ++i)
      if (av.data[i] > lo && av.data[i] < hi) ga.data[i] += g.data[i];
  });
  return Var(this, id);
}

Var Tape::add_row(Var x, Var row) {
  check_owned(x, "add_row");
  check_owned(row, "add_row");
  if (row.rows() != 1 || row.cols() != x.cols())
    throw ShapeError("add_row: row " + row.value().shape_str() + " does not broadcast over " +
                     x.value().shape_str());
  const int ix = x.index_, ir = row.index_;
  Matrix out = x.value();
  for (int i = 0; i < out.rows; ++i)
    for (int c = 0; c < out.cols; ++c) out.at(i, c) += row.value().at(0, c);
  const int id = push(std::move(out), {ix, ir}, [ix, ir](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& gx = t.grad_of(ix);
    Matrix& gr = t.grad_of(ir);
    for (int i = 0; i < g.rows; ++i)
      for (int c = 0; c < g.cols; ++c) {
        gx.at(i, c) += g.at(i, c);
        gr.at(0, c) += g.at(i, c);
      }
  });
  return Var(this, id);
}

Var Tape::scale_rows(Var x, std::vector<double> weights) {
  check_owned(x, "scale_rows");
  if (static_cast<int>(weights.size()) != x.rows())
    throw ShapeError("scale_rows: " + std::to_string(weights.size()) + " weights for " +
                     x.value().shape_str());
  const int ix = x.index_;
  Matrix out = x.value();
  for (int i = 0; i < out.rows; ++i)
    for (int c = 0; c < out.cols; ++c) out.at(i, c) *= weights[static_cast<std::size_t>(i)];
  const int id = push(std::move(out), {ix}, [ix, w = std::move(weights)](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& gx = t.grad_of(ix);
    for (int i = 0; i < g.rows; ++i)
      for (int c = 0; c < g.cols; ++c) gx.at(i, c) += g.at(i, c) * w[static_cast<std::size_t>(i)];
  });
  return Var(this, id);
}

Var Tape::softmax_rows(Var x) {
  check_owned(x, "softmax_rows");
  require_finite(x.value(), "softmax_rows");
  const int ix = x.index_;
  Matrix out = x.value();
  for (int i = 0; i < out.rows; ++i) {
    double mx = out.at(i, 0);
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, out.at(i, c));
    double sum = 0.0;
    for (int c = 0; c < out.cols; ++c) {
      out.at(i, c) = std::exp(out.at(i, c) - mx);
      sum += out.at(i, c);
    }
    for (int c = 0; c < out.cols; ++c) out.at(i, c) /= sum;
  }
  const int id = push(std::move(out), {ix}, [ix](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& y = t.node(self).value;
    Matrix& gx = t.grad_of(ix);
    for (int i = 0; i < y.rows; ++i) {
      double dot = 0.0;
      for (int c = 0; c < y.cols; ++c) dot += g.at(i, c) * y.at(i, c);
      for (int c = 0; c < y.cols; ++c) gx.at(i, c) += y.at(i, c) * (g.at(i, c) - dot);
    }
  });
  return Var(this, id);
}

Var Tape::sum(Var x) {
  check_owned(x, "sum");
  const int ix = x.index_;
  Matrix out(1, 1);
  for (double v : x.value().data) out.data[0] += v;
  const int id = push(std::move(out), {ix}, [ix](Tape& t, int self) {
    const double g = t.node(self).grad.data[0];
    Matrix& gx = t.grad_of(ix);
    for (double& v : gx.data) v += g;
  });
  return Var(this, id);
}

Var Tape::mean_all(Var x) {
  const int n = x.value().size();
  if (n == 0) throw ShapeError("mean_all: empty matrix");
  return scale(sum(x), 1.0 / n);
}

Var Tape::row_dot(Var a, Var b) {
  check_owned(a, "row_dot");
  check_owned(b, "row_dot");
  require_same_shape(a.value(), b.value(), "row_dot");
  const int ia = a.index_, ib = b.index_;
  Matrix out(a.rows(), 1);
  for (int i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (int c = 0; c < a.cols(); ++c) acc += a.value().at(i, c) * b.value().at(i, c);
    out.at(i, 0) = acc;
  }
  const int id = push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    const Matrix& bv = t.node(ib).value;
    Matrix& ga = t.grad_of(ia);
    Matrix& gb = t.grad_of(ib);
    for (int i = 0; i < av.rows; ++i) {
      const double gi = g.at(i, 0);
      if (gi == 0.0) continue;
      for (int c = 0; c < av.cols; ++c) {
        ga.at(i, c) += gi * bv.at(i, c);
        gb.at(i, c) += gi * av.at(i, c);
      }
    }
  });
  return Var(this, id);
}

Var Tape::concat_cols(Var a, Var b) {
  check_owned(a, "concat_cols");
  check_owned(b, "concat_cols");
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row counts differ, " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  const int ia = a.index_, ib = b.index_;
  const int ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  for (int i = 0; i < out.rows; ++i) {
    for (int c = 0; c < ca; ++c) out.at(i, c) = a.value().at(i, c);
    for (int c = 0; c < cb; ++c) out.at(i, ca + c) = b.value().at(i, c);
  }
  const int id = push(std::move(out), {ia, ib}, [ia, ib, ca, cb](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.grad_of(ia);
    Matrix& gb = t.grad_of(ib);
    for (int i = 0; i < g.rows; ++i) {
      for (int c = 0; c < ca; ++c) ga.at(i, c) += g.at(i, c);
      for (int c = 0; c < cb; ++c) gb.at(i, c) += g.at(i, ca + c);
    }
  });
  return Var(this, id);
}

Var Tape::slice_cols(Var x, int c0, int c1) {
  check_owned(x, "slice_cols");
  if (c0 < 0 || c1 > x.cols() || c0 >= c1)
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                     ") out of " + x.value().shape_str());
  const int ix = x.index_;
  Matrix out(x.rows(), c1 - c0);
  for (int i = 0; i < out.rows; ++i)
    for (int c = 0; c < out.cols; ++c) out.at(i, c) = x.value().at(i, c0 + c);
  const int id = push(std::move(out), {ix}, [ix, c0](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& gx = t.grad_of(ix);
    for (int i = 0; i < g.rows; ++i)
      for (int c = 0; c < g.cols; ++c) gx.at(i, c0 + c) += g.at(i, c);
  });
  return Var(this, id);
}

Var Tape::slice_rows(Var x, int r0, int r1) {
  check_owned(x, "slice_rows");
  if (r0 < 0 || r1 > x.rows() || r0 >= r1)
    throw ShapeError("slice_rows: range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                     ") out of " + x.value().shape_str());
  const int ix = x.index_;
  Matrix out(r1 - r0, x.cols());
  for (int i = 0; i < out.rows; ++i)
    for (int c = 0; c < out.cols; ++c) out.at(i, c) = x.value().at(r0 + i, c);
  const int id = push(std::move(out), {ix}, [ix, r0](Tape& t, int self) {
    const Matrix& g = t.node(self).grad;
    Matrix& gx = t.grad_of(ix);
    for (int i = 0; i < g.rows; ++i)
      for (int c = 0; c < g.cols; ++c) gx.at(r0 + i, c) += g.at(i, c);
  });
  return Var(this, id);
}

void Tape::backward(Var loss) {
  check_owned(loss, "backward");
  if (backward_done_) throw Error("Tape::backward: already run on this tape");
  const Matrix& lv = loss.value();
  if (lv.rows != 1 || lv.cols != 1)
    throw ShapeError("backward: loss must be 1x1, got " + lv.shape_str());
  backward_done_ = true;

  // Mark ancestors of the loss; creation order is a topological order, so a
  // single reverse sweep over marked nodes visits each exactly once.
  std::vector<int> stack{loss.index_};
  node(loss.index_).reachable = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int p : node(i).parents) {
      if (!node(p).reachable) {
        node(p).reachable = true;
        stack.push_back(p);
      }
    }
  }
  for (Node& n : nodes_)
    if (n.reachable) n.grad = Matrix(n.value.rows, n.value.cols);
  node(loss.index_).grad.data[0] = 1.0;

  for (int i = loss.index_; i >= 0; --i) {
    Node& n = node(i);
    if (n.reachable && n.backprop) n.backprop(*this, i);
  }
}

void Tape::accumulate_param_grads(ParamStore& store) const {
  if (!backward_done_) throw Error("accumulate_param_grads: backward() has not run");
  for (const Node& n : nodes_) {
    if (n.binding < 0 || !n.reachable) continue;
    Matrix& g = store.grad(n.binding);
    require_same_shape(g, n.grad, "accumulate_param_grads");
    for (int i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i];
  }
}

}  // namespace diffseg

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dialtraffic/errors.hpp"
#include "dialtraffic/nn/tensor.hpp"

namespace dialtraffic::nn {

/// Handle to a node recorded on a Graph.
struct Var {
  std::size_t id = 0;
};

/// Tape for reverse-mode differentiation over dense matrices.
///
/// Nodes are appended in forward order; `backward` walks the tape once in
/// reverse, so every node is visited exactly once. Leaves come in three kinds:
///  - constant(): untracked, never receives a gradient,
///  - leaf():     tracked, gradient readable through grad(),
///  - parameter(): tracked and bound to an external Tensor whose `grad` is
///    accumulated into when backward runs.
/// detach() produces an untracked copy, so nothing behind it sees gradient.
///
/// A graph can be differentiated once; a second backward() is a UsageError.
class Graph {
 public:
  Graph() { nodes_.reserve(64); }

  Var constant(Matrix v) { return push(std::move(v), false); }

  Var leaf(Matrix v) { return push(std::move(v), true); }

  Var parameter(Tensor& t) {
    Var v = push(t.value, true);
    nodes_[v.id].bound = &t;
    return v;
  }

  Var detach(Var x) { return push(value(x), false); }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }

  /// Gradient of the last backward() loss with respect to `v`; zeros when the
  /// node received nothing (including every detached or constant node).
  Matrix grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // ---- operations -------------------------------------------------------

  /// y = x·Wᵀ + b for a batch x (n × in), weight W (out × in), bias b (1 × out).
  Var linear(Var x, Var w, Var b) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const Matrix& bv = value(b);
    if (xv.cols() != wv.cols()) {
      throw DimensionError("linear: input " + shape_string(xv) + " does not match weight " + shape_string(wv));
    }
    if (bv.rows() != 1 || bv.cols() != wv.rows()) {
      throw DimensionError("linear: bias " + shape_string(bv) + " does not match weight " + shape_string(wv));
    }
    Matrix y(xv.rows(), wv.rows());
    y.noalias() = xv * wv.transpose();
    y.rowwise() += bv.row(0);
    return push_op(std::move(y), {x, w, b}, [x, w, b](Graph& g, const Matrix& dy) {
      if (g.needs(x)) g.accumulate(x, dy * g.value(w));
      if (g.needs(w)) g.accumulate(w, dy.transpose() * g.value(x));
      if (g.needs(b)) g.accumulate(b, dy.colwise().sum());
    });
  }

  Var relu(Var x) {
    Matrix y = value(x).cwiseMax(0.0);
    return push_op(std::move(y), {x}, [x](Graph& g, const Matrix& dy) {
      g.accumulate(x, (g.value(x).array() > 0.0).select(dy.array(), 0.0).matrix());
    });
  }

  Var add(Var a, Var b) {
    same_shape("add", a, b);
    return push_op(value(a) + value(b), {a, b}, [a, b](Graph& g, const Matrix& dy) {
      g.accumulate(a, dy);
      g.accumulate(b, dy);
    });
  }

  Var sub(Var a, Var b) {
    same_shape("sub", a, b);
    return push_op(value(a) - value(b), {a, b}, [a, b](Graph& g, const Matrix& dy) {
      g.accumulate(a, dy);
      g.accumulate(b, -dy);
    });
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    same_shape("mul", a, b);
    Matrix y = value(a).cwiseProduct(value(b));
    return push_op(std::move(y), {a, b}, [a, b](Graph& g, const Matrix& dy) {
      if (g.needs(a)) g.accumulate(a, dy.cwiseProduct(g.value(b)));
      if (g.needs(b)) g.accumulate(b, dy.cwiseProduct(g.value(a)));
    });
  }

  Var scale(Var a, double s) {
    return push_op(value(a) * s, {a}, [a, s](Graph& g, const Matrix& dy) { g.accumulate(a, dy * s); });
  }

  Var square(Var a) {
    Matrix y = value(a).array().square().matrix();
    return push_op(std::move(y), {a}, [a](Graph& g, const Matrix& dy) {
      g.accumulate(a, 2.0 * dy.cwiseProduct(g.value(a)));
    });
  }

  Var sum(Var a) {
    Matrix y(1, 1);
    y(0, 0) = value(a).sum();
    return push_op(std::move(y), {a}, [a](Graph& g, const Matrix& dy) {
      const Matrix& av = g.value(a);
      g.accumulate(a, Matrix::Constant(av.rows(), av.cols(), dy(0, 0)));
    });
  }

  Var mean(Var a) {
    const auto n = value(a).size();
    if (n == 0) throw UsageError("mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
  }

  /// Column-wise concatenation [a | b]; both operands need the same row count.
  Var concat_cols(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows()) {
      throw DimensionError("concat_cols: " + shape_string(av) + " and " + shape_string(bv));
    }
    Matrix y(av.rows(), av.cols() + bv.cols());
    y << av, bv;
    const auto ac = av.cols();
    const auto bc = bv.cols();
    return push_op(std::move(y), {a, b}, [a, b, ac, bc](Graph& g, const Matrix& dy) {
      if (g.needs(a)) g.accumulate(a, dy.leftCols(ac));
      if (g.needs(b)) g.accumulate(b, dy.rightCols(bc));
    });
  }

  /// Row i of the result is row idx[i] of x, or a zero row when idx[i] < 0.
  Var gather_rows(Var x, std::vector<long> idx) {
    const Matrix& xv = value(x);
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), xv.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= xv.rows()) throw DimensionError("gather_rows: index out of range for " + shape_string(xv));
      if (idx[i] >= 0) y.row(static_cast<Eigen::Index>(i)) = xv.row(idx[i]);
    }
    return push_op(std::move(y), {x}, [x, idx = std::move(idx)](Graph& g, const Matrix& dy) {
      const Matrix& xv = g.value(x);
      Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= 0) dx.row(idx[i]) += dy.row(static_cast<Eigen::Index>(i));
      }
      g.accumulate(x, dx);
    });
  }

  /// Picks column cols[i] from row i; result is n × 1.
  Var pick(Var x, std::vector<int> cols) {
    const Matrix& xv = value(x);
    if (static_cast<Eigen::Index>(cols.size()) != xv.rows()) {
      throw DimensionError("pick: " + std::to_string(cols.size()) + " indices for " + shape_string(xv));
    }
    Matrix y(xv.rows(), 1);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const int c = cols[static_cast<std::size_t>(i)];
      if (c < 0 || c >= xv.cols()) throw DimensionError("pick: column out of range for " + shape_string(xv));
      y(i, 0) = xv(i, c);
    }
    return push_op(std::move(y), {x}, [x, cols = std::move(cols)](Graph& g, const Matrix& dy) {
      const Matrix& xv = g.value(x);
      Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
      for (Eigen::Index i = 0; i < xv.rows(); ++i) dx(i, cols[static_cast<std::size_t>(i)]) = dy(i, 0);
      g.accumulate(x, dx);
    });
  }

  // ---- differentiation --------------------------------------------------

  void backward(Var loss) {
    if (consumed_) throw UsageError("backward called twice on the same graph");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw UsageError("backward needs a scalar loss, got " + shape_string(lv));
    }
    consumed_ = true;
    accumulate(loss, Matrix::Ones(1, 1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backprop) {
        // The closure may append to other nodes' grads but never to this one.
        const Matrix dy = n.grad;
        n.backprop(*this, dy);
      }
      if (n.bound != nullptr) n.bound->accumulate_grad(n.grad);
    }
  }

 private:
  using Backprop = std::function<void(Graph&, const Matrix&)>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Tensor* bound = nullptr;
    Backprop backprop;
  };

  Var push(Matrix v, bool requires_grad) {
    if (consumed_) throw UsageError("graph already differentiated; build a new one");
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var push_op(Matrix v, std::initializer_list<Var> parents, Backprop fn) {
    bool rg = false;
    for (Var p : parents) rg = rg || nodes_.at(p.id).requires_grad;
    Var out = push(std::move(v), rg);
    if (rg) nodes_[out.id].backprop = std::move(fn);
    return out;
  }

  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  void same_shape(const char* op, Var a, Var b) const {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
      throw DimensionError(std::string(op) + ": " + shape_string(av) + " vs " + shape_string(bv));
    }
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace dialtraffic::nn

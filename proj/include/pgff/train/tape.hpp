#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "pgff/activation.hpp"
#include "pgff/error.hpp"
#include "pgff/types.hpp"

namespace pgff::train {

/// Reverse-mode differentiation tape over dense column-batched matrices.
///
/// Operations: matrix product, add/sub (with column broadcast of an n x 1
/// right operand), Hadamard product, logistic, tanh, column slice and column
/// concatenation. Nodes are appended in evaluation order, so one reverse
/// sweep visits every node after all of its consumers.
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  explicit Tape(std::size_t reserve = 0) { nodes_.reserve(reserve); }

  Var constant(Matrix value) { return push(Op::leaf, std::move(value)); }

  /// Leaf whose gradient is accumulated into parameter block `block`.
  Var parameter(int block, Matrix value) {
    Var v = push(Op::leaf, std::move(value));
    nodes_.back().block = block;
    nodes_.back().needs_grad = true;
    return v;
  }

  Var matmul(Var a, Var b) { return push(Op::matmul, product(val(a), val(b)), a, b); }

  Var add(Var a, Var b) {
    if (val(b).cols() == 1 && val(a).cols() > 1) return push(Op::add_bcast, val(a).colwise() + val(b).col(0), a, b);
    return push(Op::add, val(a) + val(b), a, b);
  }

  Var sub(Var a, Var b) { return push(Op::sub, val(a) - val(b), a, b); }

  Var hadamard(Var a, Var b) { return push(Op::hadamard, val(a).cwiseProduct(val(b)), a, b); }

  Var sigmoid(Var a) {
    return push(Op::sigmoid, logistic_exp(val(a).array()).matrix(), a);
  }

  Var tanh(Var a) { return push(Op::tanh, tanh_exp(val(a).array()).matrix(), a); }

  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    Var v = push(Op::slice, val(a).middleCols(start, count), a);
    nodes_.back().start = start;
    return v;
  }

  Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols: nothing to concatenate");
    Eigen::Index cols = 0;
    const Eigen::Index rows = val(parts[0]).rows();
    for (Var p : parts) cols += val(p).cols();
    Matrix out(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
      out.middleCols(c, val(p).cols()) = val(p);
      c += val(p).cols();
    }
    Var v = push(Op::concat, std::move(out));
    for (Var p : parts) {
      nodes_.back().parts.push_back(p.id);
      if (needs(p.id)) nodes_.back().needs_grad = true;
    }
    return v;
  }

  [[nodiscard]] const Matrix& value(Var v) const { return val(v); }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Adds g to d(loss)/d(v).
  void seed(Var v, const Matrix& g) { grad(v.id) += g; }

  /// Reverse sweep; parameter-leaf gradients are added into grads[block].
  void backward(std::vector<Matrix>& grads) {
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.g.size() == 0) continue;
      const Matrix& g = n.g;
      switch (n.op) {
        case Op::leaf:
          if (n.block >= 0) grads[static_cast<std::size_t>(n.block)] += g;
          break;
        case Op::matmul:
          if (needs(n.b)) accumulate_transposed_product(grad(n.b), val_id(n.a), g);
          if (is_parameter(n.a)) {
            // Weight gradients are gathered and formed with one product per
            // parameter once the sweep is done.
            deferred_.push_back({n.a, n.b, std::move(n.g)});
          } else if (needs(n.a)) {
            grad(n.a).noalias() += g * val_id(n.b).transpose();
          }
          break;
        case Op::add:
          if (needs(n.a)) grad(n.a) += g;
          if (needs(n.b)) grad(n.b) += g;
          break;
        case Op::add_bcast:
          if (needs(n.a)) grad(n.a) += g;
          if (needs(n.b)) grad(n.b) += g.rowwise().sum();
          break;
        case Op::sub:
          if (needs(n.a)) grad(n.a) += g;
          if (needs(n.b)) grad(n.b) -= g;
          break;
        case Op::hadamard:
          if (needs(n.a)) grad(n.a) += g.cwiseProduct(val_id(n.b));
          if (needs(n.b)) grad(n.b) += g.cwiseProduct(val_id(n.a));
          break;
        case Op::sigmoid:
          if (needs(n.a)) grad(n.a).array() += g.array() * n.value.array() * (1.0 - n.value.array());
          break;
        case Op::tanh:
          if (needs(n.a)) grad(n.a).array() += g.array() * (1.0 - n.value.array().square());
          break;
        case Op::slice:
          if (needs(n.a)) grad(n.a).middleCols(n.start, g.cols()) += g;
          break;
        case Op::concat: {
          Eigen::Index c = 0;
          for (int p : n.parts) {
            const Eigen::Index w = val_id(p).cols();
            if (needs(p)) grad(p) += g.middleCols(c, w);
            c += w;
          }
          break;
        }
      }
      n.g.resize(0, 0);
    }
    flush_deferred(grads);
  }

 private:
  enum class Op { leaf, matmul, add, add_bcast, sub, hadamard, sigmoid, tanh, slice, concat };

  struct Node {
    Op op;
    Matrix value;
    Matrix g;
    int a = -1;
    int b = -1;
    int block = -1;
    Eigen::Index start = 0;
    std::vector<int> parts;
    bool needs_grad = false;
  };

  Var push(Op op, Matrix value, Var a, Var b) { return push_ids(op, std::move(value), a.id, b.id); }
  Var push(Op op, Matrix value, Var a) { return push_ids(op, std::move(value), a.id, -1); }
  Var push(Op op, Matrix value) { return push_ids(op, std::move(value), -1, -1); }

  Var push_ids(Op op, Matrix value, int a, int b) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.a = a;
    n.b = b;
    n.needs_grad = needs(a) || needs(b);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  // Narrow right operands go column by column through matrix-vector
  // products; the general product path repacks the left operand per call.
  static constexpr Eigen::Index kNarrow = 8;

  // out += a * b
  static void accumulate_product(Matrix& out, const Matrix& a, const Matrix& b) {
    if (b.cols() > kNarrow) {
      out.noalias() += a * b;
      return;
    }
    for (Eigen::Index j = 0; j < b.cols(); ++j) out.col(j).noalias() += a * b.col(j);
  }

  // out += a^T * b
  static void accumulate_transposed_product(Matrix& out, const Matrix& a, const Matrix& b) {
    if (b.cols() > kNarrow) {
      out.noalias() += a.transpose() * b;
      return;
    }
    for (Eigen::Index j = 0; j < b.cols(); ++j) out.col(j).noalias() += a.transpose() * b.col(j);
  }

  static Matrix product(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows(), b.cols());
    accumulate_product(out, a, b);
    return out;
  }

  struct Deferred {
    int weight;
    int input;
    Matrix g;
  };

  // grads[block] += [g_1 .. g_m] [x_1 .. x_m]^T over all products sharing a weight.
  void flush_deferred(std::vector<Matrix>& grads) {
    std::stable_sort(deferred_.begin(), deferred_.end(),
                     [](const Deferred& x, const Deferred& y) { return x.weight < y.weight; });
    std::size_t i = 0;
    while (i < deferred_.size()) {
      std::size_t j = i;
      Eigen::Index cols = 0;
      while (j < deferred_.size() && deferred_[j].weight == deferred_[i].weight) cols += deferred_[j++].g.cols();
      const Node& w = nodes_[static_cast<std::size_t>(deferred_[i].weight)];
      Matrix G(w.value.rows(), cols);
      Matrix X(w.value.cols(), cols);
      Eigen::Index c = 0;
      for (std::size_t k = i; k < j; ++k) {
        const Eigen::Index m = deferred_[k].g.cols();
        G.middleCols(c, m) = deferred_[k].g;
        X.middleCols(c, m) = val_id(deferred_[k].input);
        c += m;
      }
      grads[static_cast<std::size_t>(w.block)].noalias() += G * X.transpose();
      i = j;
    }
    deferred_.clear();
  }

  [[nodiscard]] bool is_parameter(int id) const {
    return id >= 0 && nodes_[static_cast<std::size_t>(id)].op == Op::leaf && nodes_[static_cast<std::size_t>(id)].block >= 0;
  }

  [[nodiscard]] const Matrix& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  [[nodiscard]] const Matrix& val_id(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  [[nodiscard]] bool needs(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }

  Matrix& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.g.size() == 0) n.g = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.g;
  }

  std::vector<Node> nodes_;
  std::vector<Deferred> deferred_;
};

}  // namespace pgff::train

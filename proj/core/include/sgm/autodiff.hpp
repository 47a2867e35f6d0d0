#pragma once

// Reverse-mode differentiation over dense double matrices.
//
// A Tape records every primitive in creation order, which is a topological
// order of the computation graph, so backward() is a single reverse sweep.
// Values are double precision throughout. Broadcasting is limited to a 1 x c
// row vector (or a 1 x 1 scalar) added to an r x c matrix.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include <sgm/types.hpp>

namespace sgm::ad {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Clamp applied by log() and div(); below it the gradient is zero.
inline constexpr double kDefaultFloor = 1e-12;

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Scalar value of a 1 x 1 Var.
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  /// Records a primitive result. `backprop` receives d(loss)/d(result) and
  /// must call accumulate() on the parents.
  Var record(Matrix value, const std::vector<Var>& parents, Backprop backprop);

  /// Populates gradients of every node reachable from a 1 x 1 loss. May be
  /// called once per tape.
  void backward(Var loss);

  /// Gradient of the loss with respect to v; zeros when v is unreachable.
  Matrix grad(Var v) const;

  bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id())).requires_grad; }
  void accumulate(Var v, const Matrix& contribution);
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Dense primitives.
Var matmul(Var a, Var b);
Var add(Var a, Var b);  // b may be 1 x c or 1 x 1 and is broadcast over rows
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b, double floor = kDefaultFloor);
Var exp(Var a);
Var log(Var a, double floor = kDefaultFloor);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var negate(Var a);
Var scale(Var a, double factor);
Var concat_cols(Var a, Var b);
Var transpose(Var a);
/// Column-major reshape.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var row_softmax(Var a);
Var log_softmax_rows(Var a);
Var reduce_sum(Var a);
/// (a - mean) / sqrt(var + eps) over all entries.
Var standardize(Var a, double eps);
/// Tr(a^T b) = sum(a o b).
Var trace_product(Var a, Var b);

// Sparse primitives. Patterns are constant; CSR order defines the order of
// per-nonzero values.
Var sparse_matmul(const SparseMatrix& a, Var x);
/// Softmax of per-nonzero logits (nnz x 1) within each row of the pattern.
Var segment_softmax(const SparseMatrix& pattern, Var logits);
/// (pattern with values replaced by `values`) * x.
Var sparse_values_matmul(const SparseMatrix& pattern, Var values, Var x);

using ParameterMap = std::map<std::string, Matrix>;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParameterMap first_moment;
  ParameterMap second_moment;
  long long step = 0;
};

/// One bias-corrected Adam update. Parameters without a gradient entry are
/// left untouched.
void adam_step(ParameterMap& params, const ParameterMap& grads, double learning_rate, const AdamOptions& options,
               AdamState& state);

}  // namespace sgm::ad

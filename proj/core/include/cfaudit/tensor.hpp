#pragma once

// Minimal reverse-mode automatic differentiation over rank-2 dense tensors.
//
// A Tape records every operation in creation order; backward() walks the
// records in reverse exactly once. Tensors are lightweight handles (tape,
// node id) and are only valid while their tape is alive. Scalars are 1x1.
//
// Binary elementwise ops broadcast an operand whose row or column count is 1
// against the other operand (bias rows, per-sample columns, scalars).

#include <cstdint>
#include <string>
#include <vector>

#include "cfaudit/matrix.hpp"

namespace cfaudit {

/// A learnable array owned outside the tape. `grad` is overwritten by
/// Tape::backward for every parameter bound into that tape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
};

enum class Op : std::uint8_t {
  Constant,
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,
  AddScalar,
  MatMul,
  Sigmoid,
  Tanh,
  Log,
  Exp,
  Softplus,
  Square,
  Sum,
  Mean,
  RowSum,
  Concat,
  Slice,
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 tensor.
  double item() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// With `check_finite`, any op producing NaN/Inf throws Errc::NonFinite.
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor constant(double value);
  /// Binds `p` as a differentiable leaf. `p` must outlive backward().
  Tensor leaf(Parameter& p);

  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);
  Tensor div(Tensor a, Tensor b);
  Tensor neg(Tensor a);
  Tensor scale(Tensor a, double k);
  Tensor add_scalar(Tensor a, double k);
  Tensor matmul(Tensor a, Tensor b);
  Tensor sigmoid(Tensor a);
  Tensor tanh(Tensor a);
  Tensor log(Tensor a);
  Tensor exp(Tensor a);
  Tensor softplus(Tensor a);
  Tensor square(Tensor a);
  Tensor sum(Tensor a);
  Tensor mean(Tensor a);
  /// Sum across columns: [n x d] -> [n x 1].
  Tensor row_sum(Tensor a);
  /// Column-wise concatenation of tensors with equal row counts.
  Tensor concat(Tensor a, Tensor b);
  /// Columns [begin, end).
  Tensor slice(Tensor a, Eigen::Index begin, Eigen::Index end);

  /// Reverse pass from a 1x1 loss. Gradients of every bound Parameter are
  /// reset and then accumulated; parameters not reached end with zeros.
  void backward(Tensor loss);

  /// Gradient of the last backward pass w.r.t. a tensor that depends on a
  /// parameter; throws InvalidArgument for constants.
  const Matrix& grad(Tensor t) const;

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  Op op(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

 private:
  struct Node {
    Op op = Op::Constant;
    int lhs = -1;
    int rhs = -1;
    double scalar = 0.0;
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Matrix value;
    Matrix grad;
  };

  Tensor push(Node node);
  Tensor binary(Op op, Tensor a, Tensor b);
  Tensor unary(Op op, Tensor a, Matrix value, double scalar = 0.0);
  const Node& node(Tensor t) const;
  void check_owner(Tensor t) const;

  std::vector<Node> nodes_;
  bool check_finite_;
  bool has_backward_ = false;
};

Tensor operator+(Tensor a, Tensor b);
Tensor operator-(Tensor a, Tensor b);
Tensor operator*(Tensor a, Tensor b);
Tensor operator/(Tensor a, Tensor b);
Tensor operator-(Tensor a);
Tensor operator*(double k, Tensor a);
Tensor operator*(Tensor a, double k);
Tensor operator+(Tensor a, double k);
Tensor operator-(Tensor a, double k);

Tensor matmul(Tensor a, Tensor b);
Tensor sigmoid(Tensor a);
Tensor tanh(Tensor a);
Tensor log(Tensor a);
Tensor exp(Tensor a);
Tensor softplus(Tensor a);
Tensor square(Tensor a);
Tensor sum(Tensor a);
Tensor mean(Tensor a);
Tensor row_sum(Tensor a);
Tensor concat(Tensor a, Tensor b);
Tensor slice(Tensor a, Eigen::Index begin, Eigen::Index end);

}  // namespace cfaudit

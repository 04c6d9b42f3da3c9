#include "cfaudit/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cfaudit/error.hpp"

namespace cfaudit {
namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, bool& ok) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  ok = false;
  return 0;
}

bool same_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols) { return m.rows() == rows && m.cols() == cols; }

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (same_shape(m, rows, cols)) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums `g` over the dimensions along which an operand of shape rows x cols
// was broadcast.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NoInverse: return "NoInverse";
    case Errc::AbductionFailed: return "AbductionFailed";
    case Errc::NotRotationInvariant: return "NotRotationInvariant";
    case Errc::FinetuneFailed: return "FinetuneFailed";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::NonFinite: return "NonFinite";
    case Errc::OutOfSupport: return "OutOfSupport";
    case Errc::DegenerateNormalizer: return "DegenerateNormalizer";
    case Errc::UnknownScm: return "UnknownScm";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::UsageError: return "UsageError";
  }
  return "Unknown";
}

const Matrix& Tensor::value() const {
  if (tape_ == nullptr) throw Error(Errc::InvalidArgument, "use of an unbound tensor");
  return tape_->value(id_);
}

double Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw Error(Errc::ShapeMismatch, "item() on " + shape_str(v));
  return v(0, 0);
}

bool Tensor::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

const Tape::Node& Tape::node(Tensor t) const {
  check_owner(t);
  return nodes_[static_cast<std::size_t>(t.id_)];
}

void Tape::check_owner(Tensor t) const {
  if (t.tape_ != this || t.id_ < 0 || static_cast<std::size_t>(t.id_) >= nodes_.size()) {
    throw Error(Errc::InvalidArgument, "tensor does not belong to this tape");
  }
}

Tensor Tape::push(Node n) {
  if (check_finite_ && !n.value.allFinite()) {
    throw Error(Errc::NonFinite, "op " + std::to_string(static_cast<int>(n.op)) + " produced a non-finite value");
  }
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Tensor Tape::leaf(Parameter& p) {
  Node n;
  n.op = Op::Leaf;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Tensor Tape::binary(Op op, Tensor a, Tensor b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  Node n;
  n.op = op;
  n.lhs = a.id_;
  n.rhs = b.id_;
  n.requires_grad = na.requires_grad || nb.requires_grad;

  if (op == Op::MatMul) {
    if (na.value.cols() != nb.value.rows()) {
      throw Error(Errc::ShapeMismatch, "matmul " + shape_str(na.value) + " x " + shape_str(nb.value));
    }
    n.value.noalias() = na.value * nb.value;
    return push(std::move(n));
  }
  if (op == Op::Concat) {
    if (na.value.rows() != nb.value.rows()) {
      throw Error(Errc::ShapeMismatch, "concat " + shape_str(na.value) + " | " + shape_str(nb.value));
    }
    n.value.resize(na.value.rows(), na.value.cols() + nb.value.cols());
    n.value << na.value, nb.value;
    return push(std::move(n));
  }

  bool ok = true;
  const Eigen::Index rows = broadcast_dim(na.value.rows(), nb.value.rows(), ok);
  const Eigen::Index cols = broadcast_dim(na.value.cols(), nb.value.cols(), ok);
  if (!ok) {
    throw Error(Errc::ShapeMismatch, "cannot broadcast " + shape_str(na.value) + " with " + shape_str(nb.value));
  }
  Matrix lhs_expanded, rhs_expanded;
  const Matrix& lhs = same_shape(na.value, rows, cols) ? na.value : (lhs_expanded = expand(na.value, rows, cols));
  const Matrix& rhs = same_shape(nb.value, rows, cols) ? nb.value : (rhs_expanded = expand(nb.value, rows, cols));
  switch (op) {
    case Op::Add: n.value = lhs + rhs; break;
    case Op::Sub: n.value = lhs - rhs; break;
    case Op::Mul: n.value = lhs.cwiseProduct(rhs); break;
    case Op::Div: n.value = lhs.cwiseQuotient(rhs); break;
    default: throw Error(Errc::InvalidArgument, "not a binary op");
  }
  return push(std::move(n));
}

Tensor Tape::unary(Op op, Tensor a, Matrix value, double scalar) {
  const Node& na = node(a);
  Node n;
  n.op = op;
  n.lhs = a.id_;
  n.scalar = scalar;
  n.requires_grad = na.requires_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor Tape::add(Tensor a, Tensor b) { return binary(Op::Add, a, b); }
Tensor Tape::sub(Tensor a, Tensor b) { return binary(Op::Sub, a, b); }
Tensor Tape::mul(Tensor a, Tensor b) { return binary(Op::Mul, a, b); }
Tensor Tape::div(Tensor a, Tensor b) { return binary(Op::Div, a, b); }
Tensor Tape::matmul(Tensor a, Tensor b) { return binary(Op::MatMul, a, b); }
Tensor Tape::concat(Tensor a, Tensor b) { return binary(Op::Concat, a, b); }

Tensor Tape::neg(Tensor a) { return unary(Op::Neg, a, -node(a).value); }
Tensor Tape::scale(Tensor a, double k) { return unary(Op::Scale, a, node(a).value * k, k); }
Tensor Tape::add_scalar(Tensor a, double k) {
  return unary(Op::AddScalar, a, (node(a).value.array() + k).matrix(), k);
}

Tensor Tape::sigmoid(Tensor a) {
  return unary(Op::Sigmoid, a, node(a).value.unaryExpr(&sigmoid_scalar));
}
Tensor Tape::tanh(Tensor a) { return unary(Op::Tanh, a, tanh_of(node(a).value)); }
Tensor Tape::log(Tensor a) { return unary(Op::Log, a, node(a).value.array().log().matrix()); }
Tensor Tape::exp(Tensor a) { return unary(Op::Exp, a, node(a).value.array().exp().matrix()); }
Tensor Tape::softplus(Tensor a) {
  return unary(Op::Softplus, a, node(a).value.unaryExpr(&softplus_scalar));
}
Tensor Tape::square(Tensor a) { return unary(Op::Square, a, node(a).value.array().square().matrix()); }
Tensor Tape::sum(Tensor a) { return unary(Op::Sum, a, Matrix::Constant(1, 1, node(a).value.sum())); }
Tensor Tape::mean(Tensor a) {
  const Matrix& v = node(a).value;
  if (v.size() == 0) throw Error(Errc::ShapeMismatch, "mean of an empty tensor");
  return unary(Op::Mean, a, Matrix::Constant(1, 1, v.mean()));
}
Tensor Tape::row_sum(Tensor a) { return unary(Op::RowSum, a, node(a).value.rowwise().sum()); }

Tensor Tape::slice(Tensor a, Eigen::Index begin, Eigen::Index end) {
  const Matrix& v = node(a).value;
  if (begin < 0 || end > v.cols() || begin >= end) {
    throw Error(Errc::ShapeMismatch, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                         ") of " + shape_str(v));
  }
  Node n;
  n.op = Op::Slice;
  n.lhs = a.id_;
  n.begin = begin;
  n.end = end;
  n.requires_grad = node(a).requires_grad;
  n.value = v.middleCols(begin, end - begin);
  return push(std::move(n));
}

void Tape::backward(Tensor loss) {
  check_owner(loss);
  if (nodes_[static_cast<std::size_t>(loss.id_)].value.size() != 1) {
    throw Error(Errc::NonScalarLoss, "backward from " + shape_str(nodes_[static_cast<std::size_t>(loss.id_)].value));
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    if (n.param != nullptr) n.param->grad = Matrix::Zero(n.param->value.rows(), n.param->value.cols());
  }
  has_backward_ = true;
  Node& root = nodes_[static_cast<std::size_t>(loss.id_)];
  if (!root.requires_grad) return;
  root.grad(0, 0) = 1.0;

  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) continue;
    const Matrix& g = n.grad;
    auto accumulate = [&](int target, const Matrix& contribution) {
      Node& t = nodes_[static_cast<std::size_t>(target)];
      if (!t.requires_grad) return;
      if (same_shape(contribution, t.value.rows(), t.value.cols())) {
        t.grad += contribution;
      } else {
        t.grad += reduce_to(contribution, t.value.rows(), t.value.cols());
      }
    };
    auto input = [&](int target) -> const Matrix& { return nodes_[static_cast<std::size_t>(target)].value; };

    switch (n.op) {
      case Op::Constant: break;
      case Op::Leaf: n.param->grad += g; break;
      case Op::Add:
        accumulate(n.lhs, g);
        accumulate(n.rhs, g);
        break;
      case Op::Sub:
        accumulate(n.lhs, g);
        accumulate(n.rhs, -g);
        break;
      case Op::Mul: {
        Matrix a_expanded, b_expanded;
        const Matrix& a = same_shape(input(n.lhs), g.rows(), g.cols())
                              ? input(n.lhs)
                              : (a_expanded = expand(input(n.lhs), g.rows(), g.cols()));
        const Matrix& b = same_shape(input(n.rhs), g.rows(), g.cols())
                              ? input(n.rhs)
                              : (b_expanded = expand(input(n.rhs), g.rows(), g.cols()));
        accumulate(n.lhs, g.cwiseProduct(b));
        accumulate(n.rhs, g.cwiseProduct(a));
        break;
      }
      case Op::Div: {
        const Matrix b = expand(input(n.rhs), g.rows(), g.cols());
        accumulate(n.lhs, g.cwiseQuotient(b));
        accumulate(n.rhs, -g.cwiseProduct(n.value).cwiseQuotient(b));
        break;
      }
      case Op::Neg: accumulate(n.lhs, -g); break;
      case Op::Scale: accumulate(n.lhs, g * n.scalar); break;
      case Op::AddScalar: accumulate(n.lhs, g); break;
      case Op::MatMul: {
        if (nodes_[static_cast<std::size_t>(n.lhs)].requires_grad) accumulate(n.lhs, g * input(n.rhs).transpose());
        if (nodes_[static_cast<std::size_t>(n.rhs)].requires_grad) accumulate(n.rhs, input(n.lhs).transpose() * g);
        break;
      }
      case Op::Sigmoid:
        accumulate(n.lhs, (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::Tanh:
        accumulate(n.lhs, (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::Log: accumulate(n.lhs, g.cwiseQuotient(input(n.lhs))); break;
      case Op::Exp: accumulate(n.lhs, g.cwiseProduct(n.value)); break;
      case Op::Softplus:
        accumulate(n.lhs, g.cwiseProduct(input(n.lhs).unaryExpr(&sigmoid_scalar)));
        break;
      case Op::Square: accumulate(n.lhs, (2.0 * g.array() * input(n.lhs).array()).matrix()); break;
      case Op::Sum: {
        const Matrix& x = input(n.lhs);
        accumulate(n.lhs, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::Mean: {
        const Matrix& x = input(n.lhs);
        accumulate(n.lhs, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::RowSum: {
        const Matrix& x = input(n.lhs);
        accumulate(n.lhs, g.replicate(1, x.cols()));
        break;
      }
      case Op::Concat: {
        const Eigen::Index left = input(n.lhs).cols();
        accumulate(n.lhs, g.leftCols(left));
        accumulate(n.rhs, g.rightCols(g.cols() - left));
        break;
      }
      case Op::Slice: {
        const Matrix& x = input(n.lhs);
        Matrix full = Matrix::Zero(x.rows(), x.cols());
        full.middleCols(n.begin, n.end - n.begin) = g;
        accumulate(n.lhs, full);
        break;
      }
    }
  }
}

const Matrix& Tape::grad(Tensor t) const {
  const Node& n = node(t);
  if (!has_backward_) throw Error(Errc::InvalidArgument, "grad() before backward()");
  if (!n.requires_grad) throw Error(Errc::InvalidArgument, "tensor does not depend on any parameter");
  return n.grad;
}

namespace {
Tape& tape_of(Tensor a) {
  if (a.tape() == nullptr) throw Error(Errc::InvalidArgument, "use of an unbound tensor");
  return *a.tape();
}
}  // namespace

Tensor operator+(Tensor a, Tensor b) { return tape_of(a).add(a, b); }
Tensor operator-(Tensor a, Tensor b) { return tape_of(a).sub(a, b); }
Tensor operator*(Tensor a, Tensor b) { return tape_of(a).mul(a, b); }
Tensor operator/(Tensor a, Tensor b) { return tape_of(a).div(a, b); }
Tensor operator-(Tensor a) { return tape_of(a).neg(a); }
Tensor operator*(double k, Tensor a) { return tape_of(a).scale(a, k); }
Tensor operator*(Tensor a, double k) { return tape_of(a).scale(a, k); }
Tensor operator+(Tensor a, double k) { return tape_of(a).add_scalar(a, k); }
Tensor operator-(Tensor a, double k) { return tape_of(a).add_scalar(a, -k); }

Tensor matmul(Tensor a, Tensor b) { return tape_of(a).matmul(a, b); }
Tensor sigmoid(Tensor a) { return tape_of(a).sigmoid(a); }
Tensor tanh(Tensor a) { return tape_of(a).tanh(a); }
Tensor log(Tensor a) { return tape_of(a).log(a); }
Tensor exp(Tensor a) { return tape_of(a).exp(a); }
Tensor softplus(Tensor a) { return tape_of(a).softplus(a); }
Tensor square(Tensor a) { return tape_of(a).square(a); }
Tensor sum(Tensor a) { return tape_of(a).sum(a); }
Tensor mean(Tensor a) { return tape_of(a).mean(a); }
Tensor row_sum(Tensor a) { return tape_of(a).row_sum(a); }
Tensor concat(Tensor a, Tensor b) { return tape_of(a).concat(a, b); }
Tensor slice(Tensor a, Eigen::Index begin, Eigen::Index end) { return tape_of(a).slice(a, begin, end); }

}  // namespace cfaudit

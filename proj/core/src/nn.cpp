#include "cfaudit/nn.hpp"

#include <cmath>

#include "cfaudit/error.hpp"

namespace cfaudit {

Mlp::Mlp(const std::string& prefix, std::vector<Eigen::Index> widths, Rng& rng, double gain)
    : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw Error(Errc::InvalidArgument, "Mlp needs at least input and output widths");
  params_.reserve(2 * (widths_.size() - 1));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const Eigen::Index in = widths_[l];
    const Eigen::Index out = widths_[l + 1];
    // Glorot-uniform.
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    const std::string stem = prefix + "." + std::to_string(l);
    params_.emplace_back(stem + ".weight", std::move(w));
    params_.emplace_back(stem + ".bias", Matrix::Zero(1, out));
  }
}

Tensor Mlp::forward(Tape& tape, Tensor x) {
  const std::size_t layers = layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    x = tape.matmul(x, tape.leaf(params_[2 * l])) + tape.leaf(params_[2 * l + 1]);
    if (l + 1 < layers) x = tape.tanh(x);
  }
  return x;
}

Matrix Mlp::evaluate(const Matrix& x) const {
  if (x.cols() != in_dim()) throw Error(Errc::ShapeMismatch, "Mlp input width mismatch");
  Matrix h = x;
  const std::size_t layers = layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix next = h * params_[2 * l].value;
    next.rowwise() += params_[2 * l + 1].value.row(0);
    if (l + 1 < layers) next = tanh_of(next);
    h = std::move(next);
  }
  return h;
}

Matrix Mlp::jacobian(const RowVector& x) const {
  if (x.cols() != in_dim()) throw Error(Errc::ShapeMismatch, "Mlp input width mismatch");
  // Forward-mode: carry d h / d x alongside h.
  RowVector h = x;
  Matrix dh = Matrix::Identity(in_dim(), in_dim());  // [in x width], rows index inputs
  const std::size_t layers = layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    RowVector pre = h * params_[2 * l].value + params_[2 * l + 1].value.row(0);
    Matrix dpre = dh * params_[2 * l].value;
    if (l + 1 < layers) {
      h = tanh_of(pre);
      const RowVector slope = (1.0 - h.array().square()).matrix();
      dh = dpre.array().rowwise() * slope.array();
    } else {
      h = pre;
      dh = dpre;
    }
  }
  return dh.transpose();
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.push_back(&p);
  return out;
}

}  // namespace cfaudit

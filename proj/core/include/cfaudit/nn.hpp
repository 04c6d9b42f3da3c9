#pragma once

#include <string>
#include <vector>

#include "cfaudit/random.hpp"
#include "cfaudit/tensor.hpp"

namespace cfaudit {

/// Fully connected network with tanh hidden activations and a linear output
/// layer. `widths` = {in, hidden..., out}. Parameters are named
/// "<prefix>.<layer>.weight" ([in x out]) and "<prefix>.<layer>.bias" ([1 x out]).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& prefix, std::vector<Eigen::Index> widths, Rng& rng, double gain = 1.0);

  Tensor forward(Tape& tape, Tensor x);
  /// Tape-free batch evaluation.
  Matrix evaluate(const Matrix& x) const;
  /// d output / d input at a single input row; [out x in].
  Matrix jacobian(const RowVector& x) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Eigen::Index in_dim() const { return widths_.empty() ? 0 : widths_.front(); }
  Eigen::Index out_dim() const { return widths_.empty() ? 0 : widths_.back(); }
  const std::vector<Eigen::Index>& widths() const { return widths_; }
  std::size_t layer_count() const { return params_.size() / 2; }

 private:
  std::vector<Eigen::Index> widths_;
  std::vector<Parameter> params_;  // weight, bias, weight, bias, ...
};

/// Collects raw pointers for optimizers/checkpoints across several modules.
template <typename... Modules>
std::vector<Parameter*> collect_parameters(Modules&... modules) {
  std::vector<Parameter*> out;
  (
      [&] {
        for (Parameter* p : modules.parameters()) out.push_back(p);
      }(),
      ...);
  return out;
}

}  // namespace cfaudit

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cfaudit/tensor.hpp"

namespace cfaudit {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  AdamOptions options;
};

/// One bias-corrected Adam update of `params` using their current `grad`.
/// Moment buffers are created lazily on the first step.
void adam_step(AdamState& state, std::span<Parameter* const> params);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options = {});

  void step() { adam_step(state_, params_); }
  void set_lr(double lr) { state_.options.lr = lr; }
  const AdamState& state() const { return state_; }
  std::span<Parameter* const> parameters() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamState state_;
};

}  // namespace cfaudit

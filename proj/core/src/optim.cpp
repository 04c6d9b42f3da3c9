#include "cfaudit/optim.hpp"

#include <cmath>

#include "cfaudit/error.hpp"

namespace cfaudit {

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw Error(Errc::ShapeMismatch, "Adam state/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || state.m[i].rows() != p.value.rows() ||
        state.m[i].cols() != p.value.cols()) {
      throw Error(Errc::ShapeMismatch, "Adam shapes differ for " + p.name);
    }
  }

  ++state.step;
  const AdamOptions& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * p.grad;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= o.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + o.eps);
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)) {
  state_.options = options;
}

}  // namespace cfaudit

#pragma once

// Conditional one-dimensional monotone flow
//
//   y = offset + span * sigmoid(scale(t) * u + loc(t)),   u ~ N(0, 1),
//
// where (loc, log scale) is an affine function of the parents. The scale is
// exp(log scale) > 0, so y is strictly increasing in u for every parameter
// value; the inverse and the log-density are available in closed form.

#include <cstdint>
#include <vector>

#include "cfaudit/adversary.hpp"
#include "cfaudit/checkpoint.hpp"
#include "cfaudit/counterfactual.hpp"
#include "cfaudit/dataset.hpp"
#include "cfaudit/random.hpp"
#include "cfaudit/tensor.hpp"

namespace cfaudit {

struct OutputRescale {
  double offset = 64.0;
  double span = 191.0;
};

struct FlowParams {
  /// "conditioner.weight" [t_dim x 2]: column 0 drives loc, column 1 log scale.
  Parameter weight;
  /// "conditioner.bias" [1 x 2].
  Parameter bias;
  OutputRescale rescale;

  static FlowParams random(Eigen::Index t_dim, Rng& rng, OutputRescale rescale = {});
  /// One-parent parameters with loc = loc_slope * t + loc_intercept and
  /// log scale = log_scale_slope * t + log_scale_intercept.
  static FlowParams affine(double loc_slope, double loc_intercept, double log_scale_slope,
                           double log_scale_intercept, OutputRescale rescale = {});
  /// The parameters of the ground-truth intensity mechanism.
  static FlowParams intensity_truth();

  double loc(const Vec& t) const;
  double log_scale(const Vec& t) const;
  double scale(const Vec& t) const;

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  /// Keys conditioner.weight, conditioner.bias, output_rescale ([offset, span]).
  Checkpoint checkpoint() const;
  static FlowParams from_checkpoint(const Checkpoint& ckpt);
};

double flow_forward(const FlowParams& p, double u, const Vec& t);
/// Throws OutOfSupport unless offset < y < offset + span.
double flow_inverse(const FlowParams& p, double y, const Vec& t);
/// log N(u; 0, 1) - log |dy/du| at u = flow_inverse(y, t).
double flow_log_prob(const FlowParams& p, double y, const Vec& t);

Matrix flow_forward(const FlowParams& p, const Matrix& u, const Matrix& t);
Matrix flow_inverse(const FlowParams& p, const Matrix& y, const Matrix& t);
Matrix flow_counterfactual(const FlowParams& p, const QueryBatch& queries);
/// Mean negative log-likelihood over a dataset with one outcome column.
double flow_mean_nll(const FlowParams& p, const Dataset& data);
/// The same quantity recorded on `tape` with p's parameters bound as leaves.
Tensor flow_nll(Tape& tape, FlowParams& p, const Dataset& data);

struct FitConfig {
  std::size_t steps = 3000;
  std::size_t batch_size = 512;
  double lr = 0.05;
  std::uint64_t seed = 0;
  OutputRescale rescale;
};

struct FlowFitResult {
  FlowParams params;
  std::vector<double> nll_log;  ///< minibatch NLL per step
  std::vector<double> disagreement_log;  ///< empty without an adversary
};

/// Minibatch maximum likelihood with Adam and a cosine learning-rate decay.
/// With `adversary`, trains on the step-two objective instead. Throws
/// NonFinite if the loss diverges.
FlowFitResult flow_fit(const Dataset& data, const FitConfig& cfg, const AdversarialObjective* adversary = nullptr);

class FlowModel final : public CounterfactualPredictor {
 public:
  explicit FlowModel(FlowParams params) : params_(std::move(params)) {}

  Vec counterfactual(const CounterfactualQuery& q) const override;
  Vec abduct(const Vec& t, const Vec& y) const override;
  const FlowParams& params() const { return params_; }

 private:
  FlowParams params_;
};

}  // namespace cfaudit

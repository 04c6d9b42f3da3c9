#pragma once

#include <cstdint>

#include "cfaudit/counterfactual.hpp"
#include "cfaudit/random.hpp"
#include "cfaudit/tensor.hpp"

namespace cfaudit {

enum class SecondStepLoss {
  /// L_generation + (disagreement - threshold)^2
  Threshold,
  /// -disagreement + lambda * L_generation; unbounded below, kept for comparison.
  Lagrangian,
};

/// Extra training term for a step-two model: push its counterfactuals away
/// from a fixed reference model's predictions on a query pool.
struct AdversarialObjective {
  QueryBatch queries;
  Matrix reference;  ///< step-one counterfactuals for `queries`, one row per query
  double normalizer = 1.0;
  double threshold = 0.0;
  SecondStepLoss form = SecondStepLoss::Threshold;
  double lambda = 1.0;
  std::size_t batch_size = 256;
};

/// Normalized disagreement between `predicted` and the reference rows.
Tensor normalized_disagreement(Tape& tape, Tensor predicted, const Matrix& reference_rows, double normalizer);

/// Step-two loss given the model's generation loss and disagreement.
Tensor second_step_loss(const AdversarialObjective& objective, Tensor generation_loss, Tensor disagreement);

/// Row indices of the next query minibatch.
std::vector<Eigen::Index> draw_rows(Rng& rng, std::size_t pool, std::size_t count);

}  // namespace cfaudit

#include "cfaudit/adversary.hpp"

#include <random>

#include "cfaudit/error.hpp"

namespace cfaudit {

Tensor normalized_disagreement(Tape& tape, Tensor predicted, const Matrix& reference_rows, double normalizer) {
  if (!(normalizer > 0.0)) throw Error(Errc::DegenerateNormalizer, "disagreement normalizer must be positive");
  return mean(row_sum(square(predicted - tape.constant(reference_rows)))) * (1.0 / normalizer);
}

Tensor second_step_loss(const AdversarialObjective& objective, Tensor generation_loss, Tensor disagreement) {
  switch (objective.form) {
    case SecondStepLoss::Threshold: return generation_loss + square(disagreement - objective.threshold);
    case SecondStepLoss::Lagrangian: return objective.lambda * generation_loss - disagreement;
  }
  throw Error(Errc::InvalidArgument, "unknown second-step loss form");
}

std::vector<Eigen::Index> draw_rows(Rng& rng, std::size_t pool, std::size_t count) {
  if (pool == 0) throw Error(Errc::TooFewSamples, "cannot draw from an empty pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  std::vector<Eigen::Index> rows(count);
  for (auto& r : rows) r = static_cast<Eigen::Index>(pick(rng));
  return rows;
}

}  // namespace cfaudit

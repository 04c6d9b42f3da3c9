#pragma once

#include <vector>

#include "cfaudit/matrix.hpp"

namespace cfaudit {

/// Evidence (t, y) plus the atomic intervention t := intervention_t.
struct CounterfactualQuery {
  Vec evidence_t;
  Vec evidence_y;
  Vec intervention_t;
};

/// Anything that answers point counterfactual queries for one node. For
/// bijective mechanisms the counterfactual posterior is a point mass.
class CounterfactualPredictor {
 public:
  virtual ~CounterfactualPredictor() = default;
  virtual Vec counterfactual(const CounterfactualQuery& q) const = 0;
  virtual Vec abduct(const Vec& t, const Vec& y) const = 0;
};

/// Column-stacked query batch used by the vectorized training objectives.
struct QueryBatch {
  Matrix evidence_t;
  Matrix evidence_y;
  Matrix intervention_t;

  std::size_t size() const { return static_cast<std::size_t>(evidence_t.rows()); }
  CounterfactualQuery query(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    return {row_of(evidence_t, r), row_of(evidence_y, r), row_of(intervention_t, r)};
  }
};

QueryBatch to_batch(const std::vector<CounterfactualQuery>& queries);
std::vector<CounterfactualQuery> to_queries(const QueryBatch& batch);

}  // namespace cfaudit

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfaudit/counterfactual.hpp"
#include "cfaudit/matrix.hpp"

namespace cfaudit {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

/// {"statistic": ..., "p_value": ..., "n_a": ..., "n_b": ...}
std::string to_json(const TestResult& r);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// Two-sided two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction of the effective size). Needs >= 10
/// samples per side.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Energy-distance two-sample test (V-statistic, scaled by n m / (n + m))
/// with a permutation p-value. Permutation k draws from derive_seed(seed, k).
TestResult energy_two_sample(const Matrix& a, const Matrix& b, std::size_t permutations = 200,
                             std::uint64_t seed = 0);

/// Piecewise-linear empirical CDF through the order statistics: the i-th of
/// n distinct sorted values maps to i / (n - 1). Tied values share the mean
/// of their positions, so the map is strictly increasing on the sample range.
class EcdfTransform {
 public:
  explicit EcdfTransform(std::span<const double> sample);

  double cdf(double x) const;
  double quantile(double p) const;
  const std::vector<double>& sorted_values() const { return values_; }
  std::size_t sample_size() const { return n_; }

 private:
  std::vector<double> values_;  // distinct, ascending
  std::vector<double> levels_;  // matching cdf levels in [0, 1]
  std::size_t n_ = 0;
};

/// x -> k1^{-1}(k2(x)): aligns samples of a second exogenous recovery with
/// the first one.
class MonotoneMap {
 public:
  MonotoneMap(EcdfTransform target, EcdfTransform source) : target_(std::move(target)), source_(std::move(source)) {}

  double operator()(double x) const { return target_.quantile(source_.cdf(x)); }
  std::vector<double> apply(std::span<const double> xs) const;

 private:
  EcdfTransform target_;
  EcdfTransform source_;
};

/// Estimates g with u1 ~ g(u2) from empirical CDFs.
MonotoneMap recover_indeterminacy(std::span<const double> u1, std::span<const double> u2);

struct AgreementResult {
  double value = 0.0;           ///< mean ||cf_a - cf_b||^2 / normalizer
  std::size_t evaluated = 0;
  std::size_t failed = 0;       ///< queries where either side could not abduct
};

AgreementResult counterfactual_agreement(const CounterfactualPredictor& a, const CounterfactualPredictor& b,
                                         std::span<const CounterfactualQuery> queries, double normalizer);

}  // namespace cfaudit

#include "cfaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cfaudit/dataset.hpp"
#include "cfaudit/error.hpp"
#include "cfaudit/random.hpp"

namespace cfaudit {

std::string to_json(const TestResult& r) {
  std::ostringstream os;
  os << "{\"statistic\":" << format_double(r.statistic) << ",\"p_value\":" << format_double(r.p_value)
     << ",\"n_a\":" << r.n_a << ",\"n_b\":" << r.n_b << "}";
  return os.str();
}

double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 10 || b.size() < 10) throw Error(Errc::TooFewSamples, "KS test needs at least 10 samples per side");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());

  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  const double en = std::sqrt(na * nb / (na + nb));
  TestResult r;
  r.statistic = d;
  r.p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
  r.n_a = sa.size();
  r.n_b = sb.size();
  return r;
}

namespace {

double row_distance(const Matrix& m, Eigen::Index i, Eigen::Index j) { return (m.row(i) - m.row(j)).norm(); }

}  // namespace

TestResult energy_two_sample(const Matrix& a, const Matrix& b, std::size_t permutations, std::uint64_t seed) {
  if (a.cols() != b.cols()) throw Error(Errc::ShapeMismatch, "energy test samples have different widths");
  if (a.rows() < 5 || b.rows() < 5) throw Error(Errc::TooFewSamples, "energy test needs at least 5 samples per side");
  if (permutations < 100) throw Error(Errc::InvalidArgument, "energy test needs at least 100 permutations");

  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const auto n = static_cast<std::size_t>(pooled.rows());
  const auto na = static_cast<std::size_t>(a.rows());
  const auto nb = static_cast<std::size_t>(b.rows());

  // Packed upper triangle of pairwise distances.
  std::vector<double> dist(n * (n - 1) / 2);
  std::vector<std::size_t> row_start(n);
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      row_start[i] = k;
      for (std::size_t j = i + 1; j < n; ++j) {
        dist[k++] = row_distance(pooled, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);

  // labels[i] = 1 when pooled row i belongs to the first sample.
  auto statistic = [&](const std::vector<std::uint8_t>& labels) {
    double s_aa = 0.0;
    double s_bb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dist.data() + row_start[i];
      double same = 0.0;
      const std::uint8_t li = labels[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        if (labels[j] == li) same += row[j - i - 1];
      }
      (li ? s_aa : s_bb) += same;
    }
    const double s_ab = total - s_aa - s_bb;
    const double fa = static_cast<double>(na);
    const double fb = static_cast<double>(nb);
    // Ordered-pair V-statistic sums are twice the unordered ones.
    const double e = 2.0 * s_ab / (fa * fb) - 2.0 * s_aa / (fa * fa) - 2.0 * s_bb / (fb * fb);
    return std::max(0.0, e * fa * fb / (fa + fb));
  };

  std::vector<std::uint8_t> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(na), 1);
  const double observed = statistic(labels);

  std::size_t at_least = 0;
  for (std::size_t k = 0; k < permutations; ++k) {
    Rng rng(derive_seed(seed, k));
    std::vector<std::uint8_t> perm = labels;
    std::shuffle(perm.begin(), perm.end(), rng);
    if (statistic(perm) >= observed - 1e-12 * std::max(1.0, observed)) ++at_least;
  }

  TestResult r;
  r.statistic = observed;
  r.p_value = static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);
  r.n_a = na;
  r.n_b = nb;
  return r;
}

EcdfTransform::EcdfTransform(std::span<const double> sample) : n_(sample.size()) {
  if (sample.size() < 2) throw Error(Errc::TooFewSamples, "ECDF needs at least 2 samples");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double denom = static_cast<double>(sorted.size() - 1);
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    values_.push_back(sorted[i]);
    levels_.push_back(0.5 * static_cast<double>(i + j - 1) / denom);
    i = j;
  }
  if (values_.size() < 2) throw Error(Errc::TooFewSamples, "ECDF needs at least 2 distinct values");
  levels_.front() = 0.0;
  levels_.back() = 1.0;
}

double EcdfTransform::cdf(double x) const {
  if (x <= values_.front()) return 0.0;
  if (x >= values_.back()) return 1.0;
  const auto it = std::upper_bound(values_.begin(), values_.end(), x);
  const auto hi = static_cast<std::size_t>(it - values_.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - values_[lo]) / (values_[hi] - values_[lo]);
  return levels_[lo] + w * (levels_[hi] - levels_[lo]);
}

double EcdfTransform::quantile(double p) const {
  if (p <= 0.0) return values_.front();
  if (p >= 1.0) return values_.back();
  const auto it = std::upper_bound(levels_.begin(), levels_.end(), p);
  const auto hi = static_cast<std::size_t>(it - levels_.begin());
  const std::size_t lo = hi - 1;
  const double w = (p - levels_[lo]) / (levels_[hi] - levels_[lo]);
  return values_[lo] + w * (values_[hi] - values_[lo]);
}

std::vector<double> MonotoneMap::apply(std::span<const double> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back((*this)(x));
  return out;
}

MonotoneMap recover_indeterminacy(std::span<const double> u1, std::span<const double> u2) {
  if (u1.size() < 10 || u2.size() < 10) throw Error(Errc::TooFewSamples, "indeterminacy recovery needs >= 10 samples");
  return MonotoneMap(EcdfTransform(u1), EcdfTransform(u2));
}

AgreementResult counterfactual_agreement(const CounterfactualPredictor& a, const CounterfactualPredictor& b,
                                         std::span<const CounterfactualQuery> queries, double normalizer) {
  if (!(normalizer > 0.0)) throw Error(Errc::InvalidArgument, "normalizer must be positive");
  AgreementResult r;
  double total = 0.0;
  for (const CounterfactualQuery& q : queries) {
    Vec ya;
    Vec yb;
    try {
      ya = a.counterfactual(q);
      yb = b.counterfactual(q);
    } catch (const Error& e) {
      if (e.code() == Errc::AbductionFailed || e.code() == Errc::OutOfSupport) {
        ++r.failed;
        continue;
      }
      throw;
    }
    if (ya.size() != yb.size()) throw Error(Errc::ShapeMismatch, "predictors disagree on outcome width");
    double sq = 0.0;
    for (std::size_t j = 0; j < ya.size(); ++j) sq += (ya[j] - yb[j]) * (ya[j] - yb[j]);
    total += sq;
    ++r.evaluated;
  }
  if (r.evaluated == 0) throw Error(Errc::AbductionFailed, "no query could be evaluated by both predictors");
  r.value = total / static_cast<double>(r.evaluated) / normalizer;
  return r;
}

}  // namespace cfaudit

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cfaudit/counterfactual.hpp"
#include "cfaudit/dataset.hpp"
#include "cfaudit/matrix.hpp"
#include "cfaudit/random.hpp"

namespace cfaudit {

/// Absolute residual allowed between forward(abduct(y, t), t) and y.
inline constexpr double kAbductionTolerance = 1e-7;

class ExogenousSpec {
 public:
  enum class Kind { Uniform, Gaussian, Gamma, Bernoulli, IsotropicGaussian, ProductUniform };

  static ExogenousSpec uniform(double lo, double hi);
  static ExogenousSpec gaussian(double mean, double std);
  /// Gamma with the given shape and rate (mean shape / rate).
  static ExogenousSpec gamma(double shape, double rate);
  static ExogenousSpec bernoulli(double p);
  static ExogenousSpec isotropic_gaussian(std::size_t dim);
  static ExogenousSpec product_uniform(double lo, double hi, std::size_t dim);

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double first() const { return a_; }
  double second() const { return b_; }

  Vec sample(Rng& rng) const;
  /// Whether `u` lies in the support (closure for continuous kinds).
  bool contains(const Vec& u) const;
  /// Whether the distribution is invariant under the planar rotation by
  /// `angle`. Isotropic Gaussians are invariant for every angle; a centered
  /// product-uniform square only for multiples of pi/2.
  bool rotation_invariant(double angle) const;
  std::string describe() const;

 private:
  ExogenousSpec(Kind kind, double a, double b, std::size_t dim) : kind_(kind), a_(a), b_(b), dim_(dim) {}

  Kind kind_;
  double a_;
  double b_;
  std::size_t dim_;
};

/// y = forward(u, t); `inverse` is empty for non-bijective mechanisms.
struct Mechanism {
  using Forward = std::function<Vec(const Vec& u, const Vec& t)>;
  using Inverse = std::function<Vec(const Vec& y, const Vec& t)>;

  Forward forward;
  Inverse inverse;
  std::size_t u_dim = 1;
  std::size_t y_dim = 1;

  bool bijective() const { return static_cast<bool>(inverse); }
};

struct ScmNode {
  std::string name;
  ExogenousSpec noise;
  Mechanism mechanism;
  std::vector<std::string> parents;
};

/// Markovian SCM over an ordered node list; the list order is the
/// topological order and every parent must appear before its child.
/// Immutable after construction.
class Scm {
 public:
  explicit Scm(std::vector<ScmNode> nodes, std::string id = {});

  const std::vector<ScmNode>& nodes() const { return nodes_; }
  const ScmNode& node(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  /// The last node; datasets record its parents as t and its value as y.
  const ScmNode& outcome() const { return nodes_.back(); }
  /// Total width of the concatenated parent values of `name`.
  std::size_t parent_dim(std::string_view name) const;
  const std::string& id() const { return id_; }

 private:
  std::vector<ScmNode> nodes_;
  std::string id_;
};

/// n ancestral samples of (parents(outcome), outcome). Row i draws from the
/// stream derive_seed(seed, i), so results do not depend on evaluation order.
Dataset sample(const Scm& scm, std::size_t n, std::uint64_t seed);

/// Point abduction through the mechanism inverse. Throws NoInverse or
/// AbductionFailed when the residual exceeds kAbductionTolerance.
Vec abduct(const Mechanism& mech, const Vec& t, const Vec& y);
/// As above, additionally rejecting u outside the node's exogenous support.
Vec abduct(const ScmNode& node, const Vec& t, const Vec& y);

/// Abduction, action (parents := intervention_t), prediction on one node.
Vec counterfactual(const Scm& scm, std::string_view node, const CounterfactualQuery& q);

using ParentPartition = std::function<bool(const Vec& t)>;

/// Partition B = {t : t[0] > median of t[0]} under the observational parent
/// distribution of `node`, estimated from `draws` ancestral samples.
ParentPartition median_partition(const Scm& scm, std::string_view node, std::size_t draws = 10001,
                                 std::uint64_t seed = 0x5eed);

/// f'(u, t) = f(u, t) for t outside `in_b`, f(R_angle u, t) for t in `in_b`.
Scm make_rotated_counterexample(const Scm& scm, std::string_view node, ParentPartition in_b, double angle);

/// Wraps one SCM node as a counterfactual predictor.
class ScmPredictor final : public CounterfactualPredictor {
 public:
  ScmPredictor(std::shared_ptr<const Scm> scm, std::string node);
  explicit ScmPredictor(Scm scm);

  Vec counterfactual(const CounterfactualQuery& q) const override;
  Vec abduct(const Vec& t, const Vec& y) const override;
  const Scm& scm() const { return *scm_; }

 private:
  std::shared_ptr<const Scm> scm_;
  std::string node_;
};

// Built-in models ------------------------------------------------------------

/// T ~ Bernoulli(0.5), U ~ Unif(0,1); Y = U if T = 1 else U - 1.
Scm build_motivating_1();
/// T ~ Bernoulli(0.5), U ~ Unif(0,1); Y = U if T = 1 else -U.
Scm build_motivating_2();

/// T = 0.5 + U_T, U_T ~ Gamma(shape 10, rate 5);
/// Y = 191 * sigmoid(0.5 U_Y + 2 T - 5) + 64, U_Y ~ N(0, 1).
Scm build_intensity_scm();

/// Two-dimensional variant with U_Y ~ N(0, I_2):
/// z1 = 0.5 u1 + 2 T - 5, z2 = 0.3 u1 + 0.4 u2 + T - 2.5, Y = 191 sigmoid(z) + 64.
Scm build_intensity_2d_scm();

struct Nonident2dConfig {
  Eigen::Index width = 64;
  int depth = 3;
  int max_steps = 8000;
  int batch_size = 256;
  double lr = 2e-3;
  /// Target of E||f(U,T) - f(U,T')||^2.
  double cf_mse_target = 1.0;
  double cf_mse_tolerance = 0.1;
  /// Target of E||f(U,T) - f(U',T)||^2 (exogenous spread at fixed parent).
  double spread_target = 1.0;
  double reconstruction_bound = 1e-3;
  std::size_t eval_samples = 20000;
};

struct Nonident2dDiagnostics {
  double cf_mse = 0.0;
  double spread_mse = 0.0;
  double reconstruction_mse = 0.0;
  int steps = 0;
};

/// Thickness parent as in the intensity model, U_Y ~ Unif(-sqrt3, sqrt3)^2 and
/// Y = f(U_Y, T) for a randomly initialised tanh network fine-tuned jointly with
/// an inference network. Abduction polishes the inference network's estimate
/// with Newton steps on f. Throws FinetuneFailed if targets are missed.
Scm build_nonidentifiable_2d(std::uint64_t seed, const Nonident2dConfig& cfg = {},
                             Nonident2dDiagnostics* diagnostics = nullptr);

/// Zoo ids: motivating-1, motivating-2, intensity, intensity-2d, nonident-2d,
/// rotated:<base>:<angle>. `seed` only affects nonident-2d.
Scm make_scm(std::string_view id, std::uint64_t seed = 0);
std::vector<std::string> zoo_ids();

}  // namespace cfaudit

#include "cfaudit/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "cfaudit/error.hpp"

namespace cfaudit {

// ExogenousSpec ---------------------------------------------------------------

ExogenousSpec ExogenousSpec::uniform(double lo, double hi) {
  if (!(lo < hi)) throw Error(Errc::InvalidArgument, "Uniform requires lo < hi");
  return {Kind::Uniform, lo, hi, 1};
}

ExogenousSpec ExogenousSpec::gaussian(double mean, double std) {
  if (!(std > 0)) throw Error(Errc::InvalidArgument, "Gaussian requires std > 0");
  return {Kind::Gaussian, mean, std, 1};
}

ExogenousSpec ExogenousSpec::gamma(double shape, double rate) {
  if (!(shape > 0) || !(rate > 0)) throw Error(Errc::InvalidArgument, "Gamma requires shape > 0 and rate > 0");
  return {Kind::Gamma, shape, rate, 1};
}

ExogenousSpec ExogenousSpec::bernoulli(double p) {
  if (!(p >= 0 && p <= 1)) throw Error(Errc::InvalidArgument, "Bernoulli requires 0 <= p <= 1");
  return {Kind::Bernoulli, p, 0.0, 1};
}

ExogenousSpec ExogenousSpec::isotropic_gaussian(std::size_t dim) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "IsotropicGaussian requires dim >= 1");
  return {Kind::IsotropicGaussian, 0.0, 1.0, dim};
}

ExogenousSpec ExogenousSpec::product_uniform(double lo, double hi, std::size_t dim) {
  if (!(lo < hi)) throw Error(Errc::InvalidArgument, "ProductUniform requires lo < hi");
  if (dim < 1) throw Error(Errc::InvalidArgument, "ProductUniform requires dim >= 1");
  return {Kind::ProductUniform, lo, hi, dim};
}

Vec ExogenousSpec::sample(Rng& rng) const {
  Vec u(dim_);
  switch (kind_) {
    case Kind::Uniform:
    case Kind::ProductUniform: {
      std::uniform_real_distribution<double> d(a_, b_);
      for (double& x : u) x = d(rng);
      break;
    }
    case Kind::Gaussian: {
      std::normal_distribution<double> d(a_, b_);
      u[0] = d(rng);
      break;
    }
    case Kind::IsotropicGaussian: {
      std::normal_distribution<double> d(0.0, 1.0);
      for (double& x : u) x = d(rng);
      break;
    }
    case Kind::Gamma: {
      std::gamma_distribution<double> d(a_, 1.0 / b_);
      u[0] = d(rng);
      break;
    }
    case Kind::Bernoulli: {
      std::bernoulli_distribution d(a_);
      u[0] = d(rng) ? 1.0 : 0.0;
      break;
    }
  }
  return u;
}

bool ExogenousSpec::contains(const Vec& u) const {
  if (u.size() != dim_) return false;
  for (double x : u) {
    if (!std::isfinite(x)) return false;
  }
  switch (kind_) {
    case Kind::Uniform:
    case Kind::ProductUniform:
    {
      const double slack = 1e-9 * (b_ - a_);
      return std::all_of(u.begin(), u.end(), [&](double x) { return x >= a_ - slack && x <= b_ + slack; });
    }
    case Kind::Gamma: return u[0] >= 0.0;
    case Kind::Bernoulli: return u[0] == 0.0 || u[0] == 1.0;
    case Kind::Gaussian:
    case Kind::IsotropicGaussian: return true;
  }
  return false;
}

bool ExogenousSpec::rotation_invariant(double angle) const {
  if (dim_ != 2) return false;
  if (kind_ == Kind::IsotropicGaussian) return true;
  if (kind_ == Kind::ProductUniform && std::abs(a_ + b_) < 1e-12) {
    const double quarter = angle / (std::numbers::pi / 2.0);
    return std::abs(quarter - std::round(quarter)) < 1e-9;
  }
  return false;
}

std::string ExogenousSpec::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Uniform: os << "Uniform(" << a_ << ", " << b_ << ")"; break;
    case Kind::Gaussian: os << "Gaussian(" << a_ << ", " << b_ << ")"; break;
    case Kind::Gamma: os << "Gamma(shape=" << a_ << ", rate=" << b_ << ")"; break;
    case Kind::Bernoulli: os << "Bernoulli(" << a_ << ")"; break;
    case Kind::IsotropicGaussian: os << "IsotropicGaussian(" << dim_ << ")"; break;
    case Kind::ProductUniform: os << "ProductUniform(" << a_ << ", " << b_ << ", " << dim_ << ")"; break;
  }
  return os.str();
}

// Scm -----------------------------------------------------------------------

Scm::Scm(std::vector<ScmNode> nodes, std::string id) : nodes_(std::move(nodes)), id_(std::move(id)) {
  if (nodes_.empty()) throw Error(Errc::InvalidArgument, "SCM has no nodes");
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const ScmNode& n = nodes_[i];
    if (!n.mechanism.forward) throw Error(Errc::InvalidArgument, "node '" + n.name + "' has no forward mechanism");
    if (n.mechanism.u_dim != n.noise.dim()) {
      throw Error(Errc::InvalidArgument, "node '" + n.name + "' mechanism u_dim differs from its noise dim");
    }
    if (n.mechanism.bijective() && n.mechanism.u_dim != n.mechanism.y_dim) {
      throw Error(Errc::InvalidArgument, "bijective node '" + n.name + "' must have u_dim == y_dim");
    }
    for (const std::string& p : n.parents) {
      if (!seen.contains(p)) {
        throw Error(Errc::InvalidArgument, "parent '" + p + "' of '" + n.name + "' is not an earlier node");
      }
    }
    if (!seen.emplace(n.name, i).second) throw Error(Errc::InvalidArgument, "duplicate node '" + n.name + "'");
  }
}

std::size_t Scm::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  throw Error(Errc::InvalidArgument, "no node named '" + std::string(name) + "'");
}

const ScmNode& Scm::node(std::string_view name) const { return nodes_[index_of(name)]; }

std::size_t Scm::parent_dim(std::string_view name) const {
  std::size_t d = 0;
  for (const std::string& p : node(name).parents) d += node(p).mechanism.y_dim;
  return d;
}

namespace {

// Ancestral pass for one row; returns values in node order.
std::vector<Vec> sample_row(const Scm& scm, Rng& rng) {
  const auto& nodes = scm.nodes();
  std::vector<Vec> values(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Vec t;
    for (const std::string& p : nodes[i].parents) {
      const Vec& pv = values[scm.index_of(p)];
      t.insert(t.end(), pv.begin(), pv.end());
    }
    values[i] = nodes[i].mechanism.forward(nodes[i].noise.sample(rng), t);
  }
  return values;
}

Vec gather_parents(const Scm& scm, const ScmNode& node, const std::vector<Vec>& values) {
  Vec t;
  for (const std::string& p : node.parents) {
    const Vec& pv = values[scm.index_of(p)];
    t.insert(t.end(), pv.begin(), pv.end());
  }
  return t;
}

}  // namespace

Dataset sample(const Scm& scm, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(Errc::InvalidArgument, "sample size must be >= 1");
  const ScmNode& out = scm.outcome();
  Dataset d;
  d.seed = seed;
  d.t.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(scm.parent_dim(out.name)));
  d.y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out.mechanism.y_dim));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto values = sample_row(scm, rng);
    const Vec t = gather_parents(scm, out, values);
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < t.size(); ++j) d.t(r, static_cast<Eigen::Index>(j)) = t[j];
    const Vec& y = values.back();
    for (std::size_t j = 0; j < y.size(); ++j) d.y(r, static_cast<Eigen::Index>(j)) = y[j];
  }
  return d;
}

Vec abduct(const Mechanism& mech, const Vec& t, const Vec& y) {
  if (!mech.bijective()) throw Error(Errc::NoInverse, "mechanism has no inverse");
  if (y.size() != mech.y_dim) throw Error(Errc::ShapeMismatch, "outcome width differs from mechanism y_dim");
  Vec u = mech.inverse(y, t);
  bool finite = u.size() == mech.u_dim;
  for (double x : u) finite = finite && std::isfinite(x);
  if (!finite) throw Error(Errc::AbductionFailed, "inverse produced no finite exogenous value");
  const Vec back = mech.forward(u, t);
  double residual = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) residual = std::max(residual, std::abs(back[j] - y[j]));
  if (!(residual <= kAbductionTolerance)) {
    throw Error(Errc::AbductionFailed, "round-trip residual " + std::to_string(residual) + " exceeds tolerance");
  }
  return u;
}

Vec abduct(const ScmNode& node, const Vec& t, const Vec& y) {
  Vec u = abduct(node.mechanism, t, y);
  if (!node.noise.contains(u)) {
    throw Error(Errc::AbductionFailed, "evidence lies outside the image of node '" + node.name + "'");
  }
  return u;
}

Vec counterfactual(const Scm& scm, std::string_view node, const CounterfactualQuery& q) {
  const ScmNode& n = scm.node(node);
  const Vec u = abduct(n, q.evidence_t, q.evidence_y);
  return n.mechanism.forward(u, q.intervention_t);
}

ParentPartition median_partition(const Scm& scm, std::string_view node, std::size_t draws, std::uint64_t seed) {
  const ScmNode& n = scm.node(node);
  if (n.parents.empty()) throw Error(Errc::InvalidArgument, "node '" + n.name + "' has no parents to partition");
  std::vector<double> first(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto values = sample_row(scm, rng);
    first[i] = gather_parents(scm, n, values)[0];
  }
  const auto mid = first.begin() + static_cast<std::ptrdiff_t>(draws / 2);
  std::nth_element(first.begin(), mid, first.end());
  const double median = *mid;
  return [median](const Vec& t) { return t.at(0) > median; };
}

Scm make_rotated_counterexample(const Scm& scm, std::string_view node, ParentPartition in_b, double angle) {
  const ScmNode& base = scm.node(node);
  if (!base.noise.rotation_invariant(angle)) {
    throw Error(Errc::NotRotationInvariant,
                base.noise.describe() + " is not invariant under a rotation by " + std::to_string(angle));
  }
  if (!base.mechanism.bijective()) throw Error(Errc::NoInverse, "rotated counterexample needs a bijective mechanism");

  const double c = std::cos(angle);
  const double s = std::sin(angle);
  auto rotate = [c, s](const Vec& u, bool transpose) {
    const double sign = transpose ? -1.0 : 1.0;
    return Vec{c * u[0] - sign * s * u[1], sign * s * u[0] + c * u[1]};
  };

  Mechanism m = base.mechanism;
  m.forward = [f = base.mechanism.forward, in_b, rotate](const Vec& u, const Vec& t) {
    return in_b(t) ? f(rotate(u, false), t) : f(u, t);
  };
  m.inverse = [g = base.mechanism.inverse, in_b, rotate](const Vec& y, const Vec& t) {
    return in_b(t) ? rotate(g(y, t), true) : g(y, t);
  };

  std::vector<ScmNode> nodes = scm.nodes();
  nodes[scm.index_of(node)].mechanism = std::move(m);
  std::ostringstream id;
  id << "rotated:" << scm.id() << ":" << angle;
  return Scm(std::move(nodes), id.str());
}

ScmPredictor::ScmPredictor(std::shared_ptr<const Scm> scm, std::string node)
    : scm_(std::move(scm)), node_(std::move(node)) {}

ScmPredictor::ScmPredictor(Scm scm)
    : scm_(std::make_shared<const Scm>(std::move(scm))), node_(scm_->outcome().name) {}

Vec ScmPredictor::counterfactual(const CounterfactualQuery& q) const { return cfaudit::counterfactual(*scm_, node_, q); }

Vec ScmPredictor::abduct(const Vec& t, const Vec& y) const { return cfaudit::abduct(scm_->node(node_), t, y); }

}  // namespace cfaudit

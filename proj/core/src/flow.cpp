#include "cfaudit/flow.hpp"

#include <cmath>
#include <numbers>

#include "cfaudit/error.hpp"
#include "cfaudit/optim.hpp"

namespace cfaudit {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unit-interval position of y, rejecting the closed boundary.
double unit_position(const FlowParams& p, double y) {
  const double q = (y - p.rescale.offset) / p.rescale.span;
  if (!(q > 0.0 && q < 1.0)) {
    throw Error(Errc::OutOfSupport, "y = " + std::to_string(y) + " outside (" + std::to_string(p.rescale.offset) +
                                        ", " + std::to_string(p.rescale.offset + p.rescale.span) + ")");
  }
  return q;
}

double logit_of_unit(double q) { return std::log(q) - std::log1p(-q); }

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

// Per-row logit(q) and the constant part log(span) + log q + log(1 - q) of
// the log-Jacobian.
struct Preprocessed {
  Matrix z;
  Matrix log_jacobian_const;
};

Preprocessed preprocess(const FlowParams& p, const Matrix& y) {
  Preprocessed out{Matrix(y.rows(), 1), Matrix(y.rows(), 1)};
  const double log_span = std::log(p.rescale.span);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double q = unit_position(p, y(i, 0));
    out.z(i, 0) = logit_of_unit(q);
    out.log_jacobian_const(i, 0) = log_span + std::log(q) + std::log1p(-q);
  }
  return out;
}

struct Conditioner {
  Tensor loc;
  Tensor log_scale;
};

Conditioner condition(Tape& tape, Tensor weight, Tensor bias, const Matrix& t) {
  const Tensor h = tape.matmul(tape.constant(t), weight) + bias;
  return {tape.slice(h, 0, 1), tape.slice(h, 1, 2)};
}

}  // namespace

FlowParams FlowParams::random(Eigen::Index t_dim, Rng& rng, OutputRescale rescale) {
  std::normal_distribution<double> d(0.0, 0.1);
  Matrix w(t_dim, 2);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = d(rng);
  Matrix b(1, 2);
  b << d(rng), d(rng);
  return {Parameter("conditioner.weight", std::move(w)), Parameter("conditioner.bias", std::move(b)), rescale};
}

FlowParams FlowParams::affine(double loc_slope, double loc_intercept, double log_scale_slope,
                              double log_scale_intercept, OutputRescale rescale) {
  Matrix w(1, 2);
  w << loc_slope, log_scale_slope;
  Matrix b(1, 2);
  b << loc_intercept, log_scale_intercept;
  return {Parameter("conditioner.weight", std::move(w)), Parameter("conditioner.bias", std::move(b)), rescale};
}

FlowParams FlowParams::intensity_truth() { return affine(2.0, -5.0, 0.0, std::log(0.5)); }

double FlowParams::loc(const Vec& t) const {
  if (static_cast<Eigen::Index>(t.size()) != weight.value.rows()) throw Error(Errc::ShapeMismatch, "parent width");
  double v = bias.value(0, 0);
  for (std::size_t j = 0; j < t.size(); ++j) v += t[j] * weight.value(static_cast<Eigen::Index>(j), 0);
  return v;
}

double FlowParams::log_scale(const Vec& t) const {
  if (static_cast<Eigen::Index>(t.size()) != weight.value.rows()) throw Error(Errc::ShapeMismatch, "parent width");
  double v = bias.value(0, 1);
  for (std::size_t j = 0; j < t.size(); ++j) v += t[j] * weight.value(static_cast<Eigen::Index>(j), 1);
  return v;
}

double FlowParams::scale(const Vec& t) const { return std::exp(log_scale(t)); }

Checkpoint FlowParams::checkpoint() const {
  Checkpoint c;
  c[weight.name] = weight.value;
  c[bias.name] = bias.value;
  Matrix r(1, 2);
  r << rescale.offset, rescale.span;
  c["output_rescale"] = r;
  return c;
}

FlowParams FlowParams::from_checkpoint(const Checkpoint& ckpt) {
  auto get = [&](const std::string& key) -> const Matrix& {
    auto it = ckpt.find(key);
    if (it == ckpt.end()) throw Error(Errc::ConfigError, "flow checkpoint lacks " + key);
    return it->second;
  };
  const Matrix& w = get("conditioner.weight");
  const Matrix& b = get("conditioner.bias");
  if (w.cols() != 2 || b.rows() != 1 || b.cols() != 2) throw Error(Errc::ShapeMismatch, "flow checkpoint shapes");
  OutputRescale r;
  if (auto it = ckpt.find("output_rescale"); it != ckpt.end()) {
    r.offset = it->second(0, 0);
    r.span = it->second(0, 1);
  }
  return {Parameter("conditioner.weight", w), Parameter("conditioner.bias", b), r};
}

double flow_forward(const FlowParams& p, double u, const Vec& t) {
  return p.rescale.offset + p.rescale.span * sigmoid(p.scale(t) * u + p.loc(t));
}

double flow_inverse(const FlowParams& p, double y, const Vec& t) {
  const double z = logit_of_unit(unit_position(p, y));
  return (z - p.loc(t)) / p.scale(t);
}

double flow_log_prob(const FlowParams& p, double y, const Vec& t) {
  const double q = unit_position(p, y);
  const double u = (logit_of_unit(q) - p.loc(t)) / p.scale(t);
  const double log_jacobian = std::log(p.rescale.span) + std::log(q) + std::log1p(-q) + p.log_scale(t);
  return -0.5 * u * u - kHalfLog2Pi - log_jacobian;
}

Matrix flow_forward(const FlowParams& p, const Matrix& u, const Matrix& t) {
  const Matrix h = (t * p.weight.value).rowwise() + p.bias.value.row(0);
  Matrix y(u.rows(), 1);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    y(i, 0) = p.rescale.offset + p.rescale.span * sigmoid(std::exp(h(i, 1)) * u(i, 0) + h(i, 0));
  }
  return y;
}

Matrix flow_inverse(const FlowParams& p, const Matrix& y, const Matrix& t) {
  const Matrix h = (t * p.weight.value).rowwise() + p.bias.value.row(0);
  Matrix u(y.rows(), 1);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    u(i, 0) = (logit_of_unit(unit_position(p, y(i, 0))) - h(i, 0)) * std::exp(-h(i, 1));
  }
  return u;
}

Matrix flow_counterfactual(const FlowParams& p, const QueryBatch& queries) {
  return flow_forward(p, flow_inverse(p, queries.evidence_y, queries.evidence_t), queries.intervention_t);
}

double flow_mean_nll(const FlowParams& p, const Dataset& data) {
  if (data.y_dim() != 1) throw Error(Errc::ShapeMismatch, "flow models a single outcome column");
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.y.rows(); ++i) total -= flow_log_prob(p, data.y(i, 0), row_of(data.t, i));
  return total / static_cast<double>(data.y.rows());
}

Tensor flow_nll(Tape& tape, FlowParams& p, const Dataset& data) {
  data.validate();
  if (data.y_dim() != 1) throw Error(Errc::ShapeMismatch, "flow models a single outcome column");
  const Preprocessed pre = preprocess(p, data.y);
  const Conditioner c = condition(tape, tape.leaf(p.weight), tape.leaf(p.bias), data.t);
  const Tensor u = (tape.constant(pre.z) - c.loc) * exp(-c.log_scale);
  return mean(0.5 * square(u) + c.log_scale) + (pre.log_jacobian_const.mean() + kHalfLog2Pi);
}

FlowFitResult flow_fit(const Dataset& data, const FitConfig& cfg, const AdversarialObjective* adversary) {
  data.validate();
  if (data.y_dim() != 1) throw Error(Errc::ShapeMismatch, "flow models a single outcome column");
  if (cfg.steps == 0 || cfg.batch_size == 0 || !(cfg.lr > 0)) throw Error(Errc::InvalidArgument, "FitConfig must be positive");

  Rng init_rng = make_rng(cfg.seed, 1);
  Rng batch_rng = make_rng(cfg.seed, 2);
  FlowFitResult result{FlowParams::random(data.t_dim(), init_rng, cfg.rescale), {}, {}};
  FlowParams& p = result.params;

  const Preprocessed pre = preprocess(p, data.y);
  Preprocessed query_pre;
  if (adversary != nullptr) query_pre = preprocess(p, adversary->queries.evidence_y);

  Adam opt(p.parameters(), {.lr = cfg.lr});
  result.nll_log.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
    opt.set_lr(cfg.lr * (0.02 + 0.98 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));

    const auto rows = draw_rows(batch_rng, data.size(), cfg.batch_size);
    Tape tape;
    const Tensor w = tape.leaf(p.weight);
    const Tensor b = tape.leaf(p.bias);
    const Conditioner c = condition(tape, w, b, gather(data.t, rows));
    const Tensor z = tape.constant(gather(pre.z, rows));
    const Tensor u = (z - c.loc) * exp(-c.log_scale);
    const Tensor nll = mean(0.5 * square(u) + c.log_scale) +
                       (gather(pre.log_jacobian_const, rows).mean() + kHalfLog2Pi);

    Tensor loss = nll;
    if (adversary != nullptr) {
      const auto qrows = draw_rows(batch_rng, adversary->queries.size(), adversary->batch_size);
      const Conditioner ce = condition(tape, w, b, gather(adversary->queries.evidence_t, qrows));
      const Conditioner ci = condition(tape, w, b, gather(adversary->queries.intervention_t, qrows));
      const Tensor u_q = (tape.constant(gather(query_pre.z, qrows)) - ce.loc) * exp(-ce.log_scale);
      const Tensor z_cf = exp(ci.log_scale) * u_q + ci.loc;
      const Tensor y_cf = sigmoid(z_cf) * p.rescale.span + p.rescale.offset;
      const Tensor dis = normalized_disagreement(tape, y_cf, gather(adversary->reference, qrows), adversary->normalizer);
      loss = second_step_loss(*adversary, nll, dis);
      result.disagreement_log.push_back(dis.item());
    }
    if (!std::isfinite(loss.item())) {
      throw Error(Errc::NonFinite, "flow loss diverged at step " + std::to_string(step));
    }
    tape.backward(loss);
    opt.step();
    result.nll_log.push_back(nll.item());
  }
  return result;
}

Vec FlowModel::counterfactual(const CounterfactualQuery& q) const {
  const double u = flow_inverse(params_, q.evidence_y.at(0), q.evidence_t);
  return {flow_forward(params_, u, q.intervention_t)};
}

Vec FlowModel::abduct(const Vec& t, const Vec& y) const { return {flow_inverse(params_, y.at(0), t)}; }

}  // namespace cfaudit

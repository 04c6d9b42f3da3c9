#include "cfaudit/gan.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cfaudit/error.hpp"
#include "cfaudit/optim.hpp"

namespace cfaudit {
namespace {

const double kLn4 = std::log(4.0);

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Mlp mlp_from_checkpoint(const std::string& prefix, const Checkpoint& ckpt) {
  std::vector<Eigen::Index> widths;
  for (int l = 0;; ++l) {
    auto it = ckpt.find(prefix + "." + std::to_string(l) + ".weight");
    if (it == ckpt.end()) break;
    if (widths.empty()) widths.push_back(it->second.rows());
    if (it->second.rows() != widths.back()) throw Error(Errc::ShapeMismatch, prefix + " layer widths do not chain");
    widths.push_back(it->second.cols());
  }
  if (widths.size() < 2) throw Error(Errc::ConfigError, "checkpoint lacks " + prefix + " layers");
  Rng rng(0);
  Mlp mlp(prefix, widths, rng);
  restore_parameters(ckpt, mlp.parameters());
  return mlp;
}

RowVector checkpoint_row(const Checkpoint& ckpt, const std::string& key) {
  auto it = ckpt.find(key);
  if (it == ckpt.end() || it->second.rows() != 1) throw Error(Errc::ConfigError, "checkpoint lacks " + key);
  return it->second.row(0);
}

// Adam with beta1 = 0.5, the usual choice for adversarial training.
constexpr AdamOptions kGanAdam{.lr = 1e-3, .beta1 = 0.5, .beta2 = 0.999, .eps = 1e-8};

}  // namespace

GanNormalization GanNormalization::from_data(const Dataset& data) {
  GanNormalization n;
  n.t_mean = data.t.colwise().mean();
  n.y_mean = data.y.colwise().mean();
  n.t_std = ((data.t.rowwise() - n.t_mean).array().square().colwise().mean()).sqrt().matrix();
  n.y_std = ((data.y.rowwise() - n.y_mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < n.t_std.cols(); ++j) n.t_std(j) = n.t_std(j) > 1e-12 ? n.t_std(j) : 1.0;
  for (Eigen::Index j = 0; j < n.y_std.cols(); ++j) n.y_std(j) = n.y_std(j) > 1e-12 ? n.y_std(j) : 1.0;
  return n;
}

Matrix GanNormalization::standardize_t(const Matrix& t) const {
  return ((t.rowwise() - t_mean).array().rowwise() / t_std.array()).matrix();
}

Matrix GanNormalization::standardize_y(const Matrix& y) const {
  return ((y.rowwise() - y_mean).array().rowwise() / y_std.array()).matrix();
}

Matrix GanNormalization::restore_y(const Matrix& y_std_units) const {
  return ((y_std_units.array().rowwise() * y_std.array()).rowwise() + y_mean.array()).matrix();
}

Checkpoint GanParams::checkpoint() const {
  Checkpoint c;
  for (const Mlp* m : {&generator, &discriminator, &inference}) {
    for (const Parameter* p : m->parameters()) c[p->name] = p->value;
  }
  c["normalization.t_mean"] = norm.t_mean;
  c["normalization.t_std"] = norm.t_std;
  c["normalization.y_mean"] = norm.y_mean;
  c["normalization.y_std"] = norm.y_std;
  return c;
}

GanParams GanParams::from_checkpoint(const Checkpoint& ckpt) {
  GanParams p{mlp_from_checkpoint("generator", ckpt), mlp_from_checkpoint("discriminator", ckpt),
              mlp_from_checkpoint("inference", ckpt), {}};
  p.norm.t_mean = checkpoint_row(ckpt, "normalization.t_mean");
  p.norm.t_std = checkpoint_row(ckpt, "normalization.t_std");
  p.norm.y_mean = checkpoint_row(ckpt, "normalization.y_mean");
  p.norm.y_std = checkpoint_row(ckpt, "normalization.y_std");
  return p;
}

Matrix gan_generate(const GanParams& p, const Matrix& u, const Matrix& t) {
  if (u.cols() != p.u_dim()) throw Error(Errc::ShapeMismatch, "generator expects a different exogenous width");
  return p.norm.restore_y(p.generator.evaluate(hstack(u, p.norm.standardize_t(t))));
}

Matrix gan_infer(const GanParams& p, const Matrix& y, const Matrix& t) {
  return p.inference.evaluate(hstack(p.norm.standardize_y(y), p.norm.standardize_t(t)));
}

Matrix gan_counterfactual(const GanParams& p, const QueryBatch& queries) {
  return gan_generate(p, gan_infer(p, queries.evidence_y, queries.evidence_t), queries.intervention_t);
}

Matrix discriminator_logits(const GanParams& p, const Matrix& y, const Matrix& t) {
  return p.discriminator.evaluate(hstack(p.norm.standardize_y(y), p.norm.standardize_t(t)));
}

double bce_discriminator_loss(const Matrix& real_logits, const Matrix& fake_logits) {
  if (real_logits.size() == 0 || fake_logits.size() == 0) throw Error(Errc::InvalidArgument, "empty batch");
  double real = 0.0;
  for (Eigen::Index i = 0; i < real_logits.size(); ++i) {
    real += softplus(-std::clamp(real_logits.data()[i], -kLogitClip, kLogitClip));
  }
  double fake = 0.0;
  for (Eigen::Index i = 0; i < fake_logits.size(); ++i) {
    fake += softplus(std::clamp(fake_logits.data()[i], -kLogitClip, kLogitClip));
  }
  return real / static_cast<double>(real_logits.size()) + fake / static_cast<double>(fake_logits.size());
}

double discriminator_loss(const GanParams& p, const Matrix& real_y, const Matrix& real_t, const Matrix& fake_y,
                          const Matrix& fake_t) {
  return bce_discriminator_loss(discriminator_logits(p, real_y, real_t), discriminator_logits(p, fake_y, fake_t));
}

double normalized_discriminator_loss(double loss) { return 100.0 * loss / kLn4; }

GanFitResult gan_fit(const Dataset& data, const GanFitConfig& cfg, const AdversarialObjective* adversary) {
  data.validate();
  if (cfg.steps == 0 || cfg.batch_size == 0 || cfg.disc_steps_per_gen == 0 || !(cfg.lr_g > 0) || !(cfg.lr_d > 0) ||
      !(cfg.cycle_weight >= 0) || !(cfg.adversary_ramp >= 0 && cfg.adversary_ramp <= 1)) {
    throw Error(Errc::InvalidArgument, "GanFitConfig values must be positive");
  }

  Rng init_rng = make_rng(cfg.seed, 1);
  Rng rng = make_rng(cfg.seed, 2);
  const Eigen::Index t_dim = data.t_dim();
  const Eigen::Index y_dim = data.y_dim();
  std::vector<Eigen::Index> hidden(static_cast<std::size_t>(cfg.depth), cfg.width);
  auto widths = [&](Eigen::Index in, Eigen::Index out) {
    std::vector<Eigen::Index> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
  };

  GanFitResult result{GanParams{Mlp("generator", widths(cfg.u_dim + t_dim, y_dim), init_rng),
                                Mlp("discriminator", widths(y_dim + t_dim, 1), init_rng),
                                Mlp("inference", widths(y_dim + t_dim, cfg.u_dim), init_rng),
                                GanNormalization::from_data(data)},
                      {}};
  GanParams& p = result.params;

  const Matrix t_std_units = p.norm.standardize_t(data.t);
  const Matrix y_std_units = p.norm.standardize_y(data.y);
  const Matrix y_scale = p.norm.y_std;  // [1 x y_dim]

  Matrix q_evidence, q_intervention;
  if (adversary != nullptr) {
    q_evidence = hstack(p.norm.standardize_y(adversary->queries.evidence_y),
                        p.norm.standardize_t(adversary->queries.evidence_t));
    q_intervention = p.norm.standardize_t(adversary->queries.intervention_t);
  }

  AdamOptions d_opts = kGanAdam;
  d_opts.lr = cfg.lr_d;
  AdamOptions g_opts = kGanAdam;
  g_opts.lr = cfg.lr_g;
  Adam d_opt(p.discriminator.parameters(), d_opts);
  Adam g_opt(collect_parameters(p.generator, p.inference), g_opts);

  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // Linear decay over the last half.
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
    const double decay = progress < 0.5 ? 1.0 : 1.0 - 0.9 * (progress - 0.5) / 0.5;
    d_opt.set_lr(cfg.lr_d * decay);
    g_opt.set_lr(cfg.lr_g * decay);

    double d_loss_value = 0.0;
    for (std::size_t k = 0; k < cfg.disc_steps_per_gen; ++k) {
      const auto rows = draw_rows(rng, data.size(), cfg.batch_size);
      const Matrix t_b = gather(t_std_units, rows);
      const Matrix fake = p.generator.evaluate(hstack(standard_normal(rng, batch, cfg.u_dim), t_b));
      Tape tape;
      const Tensor t_c = tape.constant(t_b);
      const Tensor real_logits = p.discriminator.forward(tape, tape.concat(tape.constant(gather(y_std_units, rows)), t_c));
      const Tensor fake_logits = p.discriminator.forward(tape, tape.concat(tape.constant(fake), t_c));
      const Tensor d_loss = mean(softplus(-real_logits)) + mean(softplus(fake_logits));
      tape.backward(d_loss);
      d_opt.step();
      d_loss_value = d_loss.item();
    }

    const auto rows = draw_rows(rng, data.size(), cfg.batch_size);
    const Matrix t_b = gather(t_std_units, rows);
    Tape tape;
    const Tensor t_c = tape.constant(t_b);
    const Tensor u = tape.constant(standard_normal(rng, batch, cfg.u_dim));
    const Tensor fake = p.generator.forward(tape, tape.concat(u, t_c));
    const Tensor g_loss = mean(softplus(-p.discriminator.forward(tape, tape.concat(fake, t_c))));

    const Tensor u_back = p.inference.forward(tape, tape.concat(fake, t_c));
    const Tensor u_cycle = mean(row_sum(square(u_back - u)));
    const Tensor y_real = tape.constant(gather(y_std_units, rows));
    const Tensor u_real = p.inference.forward(tape, tape.concat(y_real, t_c));
    const Tensor y_back = p.generator.forward(tape, tape.concat(u_real, t_c));
    const Tensor y_cycle = mean(row_sum(square((y_back - y_real) * tape.constant(y_scale))));
    const Tensor cycle = u_cycle + y_cycle;

    GanLogRow row{step, d_loss_value, g_loss.item(), cycle.item(), 0.0};
    Tensor loss;
    if (adversary != nullptr) {
      const auto qrows = draw_rows(rng, adversary->queries.size(), adversary->batch_size);
      const Tensor u_q = p.inference.forward(tape, tape.constant(gather(q_evidence, qrows)));
      const Tensor y_cf_std =
          p.generator.forward(tape, tape.concat(u_q, tape.constant(gather(q_intervention, qrows))));
      const Tensor y_cf = y_cf_std * tape.constant(y_scale) + tape.constant(Matrix(p.norm.y_mean));
      const Tensor dis =
          normalized_disagreement(tape, y_cf, gather(adversary->reference, qrows), adversary->normalizer);
      const double ramp = cfg.adversary_ramp > 0.0 ? std::min(1.0, progress / cfg.adversary_ramp) : 1.0;
      loss = g_loss + ramp * (second_step_loss(*adversary, g_loss, dis) - g_loss) + cfg.cycle_weight * cycle;
      row.disagreement = dis.item();
    } else {
      loss = g_loss + cfg.cycle_weight * cycle;
    }
    if (!std::isfinite(loss.item())) throw Error(Errc::NonFinite, "GAN loss diverged at step " + std::to_string(step));
    tape.backward(loss);
    g_opt.step();

    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) result.log.push_back(row);
  }
  return result;
}

double heldout_discriminator_loss(const GanParams& p, const Dataset& holdout, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xd15c);
  const Matrix fake = gan_generate(p, standard_normal(rng, holdout.t.rows(), p.u_dim()), holdout.t);
  return discriminator_loss(p, holdout.y, holdout.t, fake, holdout.t);
}

CycleErrors cycle_errors(const GanParams& p, const Dataset& data, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xc7c1e);
  CycleErrors e;
  const Matrix y_back = gan_generate(p, gan_infer(p, data.y, data.t), data.t);
  e.y_cycle = (y_back - data.y).rowwise().squaredNorm().mean();
  const Matrix u = standard_normal(rng, data.t.rows(), p.u_dim());
  const Matrix u_back = gan_infer(p, gan_generate(p, u, data.t), data.t);
  e.u_cycle = (u_back - u).rowwise().squaredNorm().mean();
  return e;
}

std::string gan_log_to_csv(const std::vector<GanLogRow>& log) {
  std::ostringstream os;
  os << "step,d_loss,g_loss,cycle_loss\n";
  for (const GanLogRow& r : log) {
    os << r.step << ',' << format_double(r.d_loss) << ',' << format_double(r.g_loss) << ','
       << format_double(r.cycle_loss) << '\n';
  }
  return os.str();
}

Vec GanModel::counterfactual(const CounterfactualQuery& q) const {
  const Matrix u = gan_infer(params_, as_row(q.evidence_y), as_row(q.evidence_t));
  return row_of(gan_generate(params_, u, as_row(q.intervention_t)), 0);
}

Vec GanModel::abduct(const Vec& t, const Vec& y) const { return row_of(gan_infer(params_, as_row(y), as_row(t)), 0); }

}  // namespace cfaudit

#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>

#include <Eigen/LU>

#include "cfaudit/error.hpp"
#include "cfaudit/nn.hpp"
#include "cfaudit/optim.hpp"
#include "cfaudit/scm.hpp"

namespace cfaudit {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

// Thickness: T = 0.5 + U_T, U_T ~ Gamma(10, rate 5).
constexpr double kThicknessShape = 10.0;
constexpr double kThicknessRate = 5.0;
constexpr double kThicknessOffset = 0.5;
const double kThicknessMean = kThicknessOffset + kThicknessShape / kThicknessRate;
const double kThicknessStd = std::sqrt(kThicknessShape) / kThicknessRate;

ScmNode thickness_node() {
  Mechanism m;
  m.forward = [](const Vec& u, const Vec&) { return Vec{kThicknessOffset + u[0]}; };
  m.inverse = [](const Vec& y, const Vec&) { return Vec{y[0] - kThicknessOffset}; };
  return {"thickness", ExogenousSpec::gamma(kThicknessShape, kThicknessRate), m, {}};
}

ScmNode binary_treatment_node() {
  Mechanism m;
  m.forward = [](const Vec& u, const Vec&) { return Vec{u[0]}; };
  m.inverse = [](const Vec& y, const Vec&) { return Vec{y[0]}; };
  return {"t", ExogenousSpec::bernoulli(0.5), m, {}};
}

bool treated(const Vec& t) { return t.at(0) >= 0.5; }

Scm build_motivating(bool second) {
  Mechanism m;
  if (!second) {
    m.forward = [](const Vec& u, const Vec& t) { return Vec{treated(t) ? u[0] : u[0] - 1.0}; };
    m.inverse = [](const Vec& y, const Vec& t) { return Vec{treated(t) ? y[0] : y[0] + 1.0}; };
  } else {
    m.forward = [](const Vec& u, const Vec& t) { return Vec{treated(t) ? u[0] : -u[0]}; };
    m.inverse = [](const Vec& y, const Vec& t) { return Vec{treated(t) ? y[0] : -y[0]}; };
  }
  return Scm({binary_treatment_node(), {"y", ExogenousSpec::uniform(0.0, 1.0), m, {"t"}}},
             second ? "motivating-2" : "motivating-1");
}

// Nonidentifiable 2-D model -------------------------------------------------

struct NonidentNets {
  Mlp generator;
  Mlp inference;

  Matrix inputs(const Vec& a, const Vec& t) const {
    Matrix x(1, 3);
    x << a[0], a[1], (t[0] - kThicknessMean) / kThicknessStd;
    return x;
  }

  Vec forward(const Vec& u, const Vec& t) const {
    const Matrix y = generator.evaluate(inputs(u, t));
    return {y(0, 0), y(0, 1)};
  }

  // Inference-network guess refined by Newton's method on the generator.
  Vec inverse(const Vec& y, const Vec& t) const {
    const Matrix guess = inference.evaluate(inputs(y, t));
    Eigen::Vector2d u(guess(0, 0), guess(0, 1));
    const Eigen::Vector2d target(y[0], y[1]);
    for (int iter = 0; iter < 50; ++iter) {
      RowVector x = inputs({u(0), u(1)}, t).row(0);
      const Matrix out = generator.evaluate(x);
      const Eigen::Vector2d r = Eigen::Vector2d(out(0, 0), out(0, 1)) - target;
      if (r.cwiseAbs().maxCoeff() < 1e-13) break;
      const Eigen::Matrix2d jac = generator.jacobian(x).leftCols(2);
      const double det = jac.determinant();
      if (!(std::abs(det) > 1e-14)) break;
      Eigen::Vector2d step = jac.inverse() * r;
      // Damp large steps so a poor guess cannot jump across folds.
      const double norm = step.norm();
      if (norm > 0.5) step *= 0.5 / norm;
      u -= step;
    }
    return {u(0), u(1)};
  }
};

struct FinetuneBatch {
  Matrix u, u_other, t, t_other;
};

FinetuneBatch draw_finetune_batch(Rng& rng, Eigen::Index n) {
  const double half_width = std::sqrt(3.0);
  std::uniform_real_distribution<double> unif(-half_width, half_width);
  std::gamma_distribution<double> gamma(kThicknessShape, 1.0 / kThicknessRate);
  FinetuneBatch b{Matrix(n, 2), Matrix(n, 2), Matrix(n, 1), Matrix(n, 1)};
  for (Eigen::Index i = 0; i < n; ++i) {
    b.u(i, 0) = unif(rng);
    b.u(i, 1) = unif(rng);
    b.u_other(i, 0) = unif(rng);
    b.u_other(i, 1) = unif(rng);
    b.t(i, 0) = (kThicknessOffset + gamma(rng) - kThicknessMean) / kThicknessStd;
    b.t_other(i, 0) = (kThicknessOffset + gamma(rng) - kThicknessMean) / kThicknessStd;
  }
  return b;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Nonident2dDiagnostics evaluate_nonident(const NonidentNets& nets, const FinetuneBatch& b) {
  const Matrix y = nets.generator.evaluate(hstack(b.u, b.t));
  const Matrix y_cf = nets.generator.evaluate(hstack(b.u, b.t_other));
  const Matrix y_spread = nets.generator.evaluate(hstack(b.u_other, b.t));
  const Matrix u_rec = nets.inference.evaluate(hstack(y, b.t));
  Nonident2dDiagnostics d;
  d.cf_mse = (y - y_cf).rowwise().squaredNorm().mean();
  d.spread_mse = (y - y_spread).rowwise().squaredNorm().mean();
  d.reconstruction_mse = (u_rec - b.u).rowwise().squaredNorm().mean();
  return d;
}

}  // namespace

Scm build_motivating_1() { return build_motivating(false); }
Scm build_motivating_2() { return build_motivating(true); }

Scm build_intensity_scm() {
  Mechanism m;
  m.forward = [](const Vec& u, const Vec& t) { return Vec{191.0 * sigmoid(0.5 * u[0] + 2.0 * t[0] - 5.0) + 64.0}; };
  m.inverse = [](const Vec& y, const Vec& t) { return Vec{2.0 * (logit((y[0] - 64.0) / 191.0) - 2.0 * t[0] + 5.0)}; };
  return Scm({thickness_node(), {"intensity", ExogenousSpec::gaussian(0.0, 1.0), m, {"thickness"}}}, "intensity");
}

Scm build_intensity_2d_scm() {
  Mechanism m;
  m.u_dim = 2;
  m.y_dim = 2;
  m.forward = [](const Vec& u, const Vec& t) {
    const double z1 = 0.5 * u[0] + 2.0 * t[0] - 5.0;
    const double z2 = 0.3 * u[0] + 0.4 * u[1] + t[0] - 2.5;
    return Vec{191.0 * sigmoid(z1) + 64.0, 191.0 * sigmoid(z2) + 64.0};
  };
  m.inverse = [](const Vec& y, const Vec& t) {
    const double z1 = logit((y[0] - 64.0) / 191.0);
    const double z2 = logit((y[1] - 64.0) / 191.0);
    const double u1 = (z1 - 2.0 * t[0] + 5.0) / 0.5;
    const double u2 = (z2 - t[0] + 2.5 - 0.3 * u1) / 0.4;
    return Vec{u1, u2};
  };
  return Scm({thickness_node(), {"intensity", ExogenousSpec::isotropic_gaussian(2), m, {"thickness"}}},
             "intensity-2d");
}

Scm build_nonidentifiable_2d(std::uint64_t seed, const Nonident2dConfig& cfg, Nonident2dDiagnostics* diagnostics) {
  Rng init_rng = make_rng(seed, 1);
  std::vector<Eigen::Index> widths{3};
  for (int i = 0; i < cfg.depth; ++i) widths.push_back(cfg.width);
  widths.push_back(2);
  auto nets = std::make_shared<NonidentNets>(
      NonidentNets{Mlp("generator", widths, init_rng), Mlp("inference", widths, init_rng)});

  Adam opt(collect_parameters(nets->generator, nets->inference), {.lr = cfg.lr});
  Rng batch_rng = make_rng(seed, 2);
  Rng eval_rng = make_rng(seed, 3);
  const FinetuneBatch eval = draw_finetune_batch(eval_rng, static_cast<Eigen::Index>(cfg.eval_samples));

  auto targets_met = [&](const Nonident2dDiagnostics& d) {
    return std::abs(d.cf_mse - cfg.cf_mse_target) <= cfg.cf_mse_tolerance &&
           std::abs(d.spread_mse - cfg.spread_target) <= cfg.cf_mse_tolerance &&
           d.reconstruction_mse < cfg.reconstruction_bound;
  };

  Nonident2dDiagnostics diag;
  int step = 0;
  for (; step < cfg.max_steps; ++step) {
    // Step decay keeps the late phase precise enough for the reconstruction bound.
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.max_steps);
    opt.set_lr(cfg.lr * (progress < 0.5 ? 1.0 : progress < 0.8 ? 0.3 : 0.1));

    const FinetuneBatch b = draw_finetune_batch(batch_rng, cfg.batch_size);
    Tape tape;
    const Tensor t = tape.constant(b.t);
    const Tensor u = tape.constant(b.u);
    const Tensor y = nets->generator.forward(tape, tape.concat(u, t));
    const Tensor y_cf = nets->generator.forward(tape, tape.concat(u, tape.constant(b.t_other)));
    const Tensor y_spread = nets->generator.forward(tape, tape.concat(tape.constant(b.u_other), t));
    const Tensor u_rec = nets->inference.forward(tape, tape.concat(y, t));

    const Tensor cf_mse = mean(row_sum(square(y - y_cf)));
    const Tensor spread_mse = mean(row_sum(square(y - y_spread)));
    const Tensor recon = mean(row_sum(square(u_rec - u)));
    const Tensor loss = square(cf_mse - cfg.cf_mse_target) + square(spread_mse - cfg.spread_target) + recon;
    tape.backward(loss);
    opt.step();

    if ((step + 1) % 500 == 0) {
      diag = evaluate_nonident(*nets, eval);
      if (targets_met(diag) && progress >= 0.5) {
        ++step;
        break;
      }
    }
  }
  diag = evaluate_nonident(*nets, eval);
  diag.steps = step;
  if (diagnostics != nullptr) *diagnostics = diag;
  if (!targets_met(diag)) {
    throw Error(Errc::FinetuneFailed, "cf_mse=" + std::to_string(diag.cf_mse) +
                                          " spread=" + std::to_string(diag.spread_mse) +
                                          " reconstruction=" + std::to_string(diag.reconstruction_mse));
  }

  Mechanism m;
  m.u_dim = 2;
  m.y_dim = 2;
  m.forward = [nets](const Vec& u, const Vec& t) { return nets->forward(u, t); };
  m.inverse = [nets](const Vec& y, const Vec& t) { return nets->inverse(y, t); };
  const double half_width = std::sqrt(3.0);
  return Scm({thickness_node(),
              {"y", ExogenousSpec::product_uniform(-half_width, half_width, 2), m, {"thickness"}}},
             "nonident-2d");
}

Scm make_scm(std::string_view id, std::uint64_t seed) {
  if (id == "motivating-1") return build_motivating_1();
  if (id == "motivating-2") return build_motivating_2();
  if (id == "intensity") return build_intensity_scm();
  if (id == "intensity-2d") return build_intensity_2d_scm();
  if (id == "nonident-2d") return build_nonidentifiable_2d(seed);
  if (id.starts_with("rotated:")) {
    const std::string_view rest = id.substr(8);
    const std::size_t colon = rest.rfind(':');
    if (colon == std::string_view::npos) throw Error(Errc::UnknownScm, "expected rotated:<base>:<angle>");
    const std::string_view angle_text = rest.substr(colon + 1);
    double angle = 0.0;
    auto [ptr, ec] = std::from_chars(angle_text.data(), angle_text.data() + angle_text.size(), angle);
    if (ec != std::errc() || ptr != angle_text.data() + angle_text.size()) {
      throw Error(Errc::UnknownScm, "bad rotation angle '" + std::string(angle_text) + "'");
    }
    const Scm base = make_scm(rest.substr(0, colon), seed);
    const std::string node = base.outcome().name;
    return make_rotated_counterexample(base, node, median_partition(base, node), angle);
  }
  throw Error(Errc::UnknownScm, "unknown SCM id '" + std::string(id) + "'");
}

std::vector<std::string> zoo_ids() {
  return {"motivating-1", "motivating-2", "intensity", "intensity-2d", "nonident-2d", "rotated:<base>:<angle>"};
}

}  // namespace cfaudit

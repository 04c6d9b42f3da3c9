#pragma once

// Conditional GAN with a deterministic inference network. The generator maps
// u ~ N(0, I) and the parents to an outcome; the inference network is trained
// jointly through cycle-consistency terms so that counterfactuals can be
// answered as generate(infer(y, t), t').

#include <cstdint>
#include <string>
#include <vector>

#include "cfaudit/adversary.hpp"
#include "cfaudit/checkpoint.hpp"
#include "cfaudit/counterfactual.hpp"
#include "cfaudit/dataset.hpp"
#include "cfaudit/nn.hpp"

namespace cfaudit {

/// Fixed affine standardization of network inputs and outputs, taken from
/// the training data.
struct GanNormalization {
  RowVector t_mean, t_std;
  RowVector y_mean, y_std;

  static GanNormalization from_data(const Dataset& data);
  Matrix standardize_t(const Matrix& t) const;
  Matrix standardize_y(const Matrix& y) const;
  Matrix restore_y(const Matrix& y_std_units) const;
};

struct GanParams {
  Mlp generator;      ///< [u, t~] -> y~
  Mlp discriminator;  ///< [y~, t~] -> logit
  Mlp inference;      ///< [y~, t~] -> u
  GanNormalization norm;

  Eigen::Index u_dim() const { return generator.in_dim() - norm.t_mean.cols(); }

  /// Keys generator.*, discriminator.*, inference.*, normalization.*.
  Checkpoint checkpoint() const;
  static GanParams from_checkpoint(const Checkpoint& ckpt);
};

Matrix gan_generate(const GanParams& p, const Matrix& u, const Matrix& t);
Matrix gan_infer(const GanParams& p, const Matrix& y, const Matrix& t);
Matrix gan_counterfactual(const GanParams& p, const QueryBatch& queries);
Matrix discriminator_logits(const GanParams& p, const Matrix& y, const Matrix& t);

/// Logits are clipped to [-30, 30] before the loss.
inline constexpr double kLogitClip = 30.0;

/// Mean BCE on real (label 1) plus mean BCE on fake (label 0); ln 4 when the
/// discriminator outputs 0 everywhere.
double bce_discriminator_loss(const Matrix& real_logits, const Matrix& fake_logits);
double discriminator_loss(const GanParams& p, const Matrix& real_y, const Matrix& real_t, const Matrix& fake_y,
                          const Matrix& fake_t);
/// 100 * loss / ln 4.
double normalized_discriminator_loss(double loss);

struct GanFitConfig {
  std::size_t steps = 4000;
  std::size_t batch_size = 256;
  double lr_g = 5e-4;
  double lr_d = 2e-4;
  std::size_t disc_steps_per_gen = 2;
  double cycle_weight = 1.0;
  std::uint64_t seed = 0;
  Eigen::Index width = 64;
  int depth = 3;
  Eigen::Index u_dim = 2;
  std::size_t log_every = 50;
  /// Fraction of training over which the step-two term's weight rises
  /// linearly from 0 to 1; 0 applies it at full weight from the start.
  double adversary_ramp = 0.0;
};

struct GanLogRow {
  std::size_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double cycle_loss = 0.0;
  double disagreement = 0.0;
};

struct GanFitResult {
  GanParams params;
  std::vector<GanLogRow> log;
};

/// Alternating discriminator / generator+inference updates. With `adversary`,
/// the generator side also minimizes the step-two objective.
GanFitResult gan_fit(const Dataset& data, const GanFitConfig& cfg, const AdversarialObjective* adversary = nullptr);

/// Discriminator loss of the model's own discriminator on held-out real rows
/// against fresh generator samples at the same parents.
double heldout_discriminator_loss(const GanParams& p, const Dataset& holdout, std::uint64_t seed);

struct CycleErrors {
  double y_cycle = 0.0;  ///< E||generate(infer(y, t), t) - y||^2 on data
  double u_cycle = 0.0;  ///< E||infer(generate(u, t), t) - u||^2 with u ~ N(0, I)
};
CycleErrors cycle_errors(const GanParams& p, const Dataset& data, std::uint64_t seed);

/// "step,d_loss,g_loss,cycle_loss" CSV.
std::string gan_log_to_csv(const std::vector<GanLogRow>& log);

class GanModel final : public CounterfactualPredictor {
 public:
  explicit GanModel(GanParams params) : params_(std::move(params)) {}

  Vec counterfactual(const CounterfactualQuery& q) const override;
  Vec abduct(const Vec& t, const Vec& y) const override;
  const GanParams& params() const { return params_; }

 private:
  GanParams params_;
};

}  // namespace cfaudit

#pragma once

// Two-step worst-case counterfactual audit. Step one fits a model to the
// data. Step two trains fresh models of the same family that must fit the data
// as well while disagreeing with step one's counterfactuals by a target
// amount; the largest disagreement reached at equal fit is the worst-case
// counterfactual error.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cfaudit/adversary.hpp"
#include "cfaudit/checkpoint.hpp"
#include "cfaudit/counterfactual.hpp"
#include "cfaudit/dataset.hpp"
#include "cfaudit/flow.hpp"
#include "cfaudit/gan.hpp"

namespace cfaudit {

enum class ModelFamily { Flow, Gan };
std::string_view to_string(ModelFamily family);
/// "flow" or "gan"; throws ConfigError otherwise.
ModelFamily parse_family(std::string_view name);

struct NormalizerMode {
  enum class Kind { CfVsEvidenceMse, Fixed };
  Kind kind = Kind::CfVsEvidenceMse;
  double value = 1.0;  ///< used only for Fixed

  static NormalizerMode cf_vs_evidence() { return {}; }
  static NormalizerMode fixed(double v) { return {Kind::Fixed, v}; }
};

struct AuditSeeds {
  std::uint64_t step1 = 1;
  std::uint64_t step2 = 2;
  std::uint64_t queries = 3;
};

struct AuditConfig {
  ModelFamily family = ModelFamily::Flow;
  /// Ascending, all >= 0.
  std::vector<double> thresholds;
  SecondStepLoss loss_form = SecondStepLoss::Threshold;
  double lambda = 1.0;
  std::size_t query_count = 2000;
  NormalizerMode normalizer;
  AuditSeeds seeds;
  /// Allowed generation-loss excess over step one; negative selects the family
  /// default (0.05 nats for flows, 0.5 percentage points for GANs).
  double fit_tolerance = -1.0;
  /// Largest worst-case error still reported as identifiable.
  double error_budget = 0.2;
  double holdout_fraction = 0.2;
  FitConfig flow;
  GanFitConfig gan;
  /// Concurrent step-two arms; 0 means CF_AUDIT_THREADS or the hardware count.
  std::size_t threads = 0;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
  double effective_fit_tolerance() const;
};

/// Evidence rows drawn from the dataset and interventions drawn independently
/// from its empirical parent distribution.
QueryBatch draw_queries(const Dataset& data, std::size_t count, std::uint64_t seed);

/// A fitted model of either family.
class FittedModel {
 public:
  explicit FittedModel(FlowParams p) : params_(std::move(p)) {}
  explicit FittedModel(GanParams p) : params_(std::move(p)) {}

  ModelFamily family() const;
  const FlowParams* flow() const { return std::get_if<FlowParams>(&params_); }
  const GanParams* gan() const { return std::get_if<GanParams>(&params_); }

  Matrix counterfactuals(const QueryBatch& queries) const;
  /// Held-out generation loss: mean NLL for flows; minus the normalized
  /// discriminator loss in percent for GANs. Lower is better for both.
  double generation_loss(const Dataset& holdout, std::uint64_t seed) const;
  Checkpoint checkpoint() const;
  std::unique_ptr<CounterfactualPredictor> predictor() const;

 private:
  std::variant<FlowParams, GanParams> params_;
};

/// Normalized counterfactual MSE between two models on a query set.
double disagreement(const FittedModel& a, const FittedModel& b, const QueryBatch& queries, double normalizer);

/// Mean ||counterfactual(q) - evidence_y||^2. Throws DegenerateNormalizer below 1e-8.
double compute_normalizer(const FittedModel& model, const QueryBatch& queries);

struct StepOneResult {
  FittedModel model;
  double generation_loss = 0.0;
};

struct AuditCurvePoint {
  double threshold = 0.0;
  double achieved_disagreement = 0.0;
  double generation_loss = 0.0;
  double generation_loss_step1 = 0.0;
  /// Set when the arm failed; the numeric fields are then meaningless.
  std::optional<std::string> error;
};

enum class Verdict { IdentifiableWithinTolerance, NonIdentifiable };
std::string_view to_string(Verdict v);

struct AuditReport {
  ModelFamily family = ModelFamily::Flow;
  std::vector<AuditCurvePoint> curve;
  double generation_loss_step1 = 0.0;
  double normalizer = 0.0;
  double worst_case_error = 0.0;
  double fit_tolerance_used = 0.0;
  double error_budget = 0.0;
  Verdict verdict = Verdict::IdentifiableWithinTolerance;
};

/// Stable JSON; identical inputs give byte-identical output.
std::string report_to_json(const AuditReport& report);
/// "threshold,achieved_disagreement,generation_loss"; failed arms are omitted.
std::string curve_to_csv(const AuditReport& report);

/// Shared inputs of every step-two arm.
struct AuditContext {
  DatasetSplit split;
  QueryBatch train_queries;
  QueryBatch eval_queries;
  double normalizer = 0.0;
};

/// Splits the data, fits the step-one model and prepares the query sets.
StepOneResult run_step_one(const Dataset& data, const AuditConfig& cfg);
AuditContext make_context(const Dataset& data, const StepOneResult& step1, const AuditConfig& cfg);

struct StepTwoResult {
  AuditCurvePoint point;
  std::optional<FittedModel> model;
};

/// Fresh model trained against step one at one threshold. Failures are
/// reported in point.error rather than thrown. `arm` selects the seed stream.
StepTwoResult run_step_two(const AuditContext& ctx, const StepOneResult& step1, double threshold, std::size_t arm,
                           const AuditConfig& cfg);

/// worst_case_error and verdict from a finished curve.
void finalize_report(AuditReport& report);

struct SweepResult {
  AuditReport report;
  StepOneResult step1;
  std::vector<std::optional<FittedModel>> arms;
};

/// Step one once, then every threshold arm, concurrently up to cfg.threads.
SweepResult sweep(const Dataset& data, const AuditConfig& cfg);

/// Thread cap from CF_AUDIT_THREADS, else the hardware count (at least 1).
std::size_t default_thread_count();

}  // namespace cfaudit

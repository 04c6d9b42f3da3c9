#include "cfaudit/audit.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cfaudit/error.hpp"
#include "cfaudit/stats.hpp"

namespace cfaudit {
namespace {

constexpr double kMinNormalizer = 1e-8;
constexpr double kFlowFitTolerance = 0.05;
constexpr double kGanFitTolerance = 0.5;

// Seed streams below the user-facing seeds.
constexpr std::uint64_t kSplitStream = 0x5b117;
constexpr std::uint64_t kEvalQueryStream = 0xe7a1;
constexpr std::uint64_t kLossStream = 0x1055;

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

FittedModel fit_model(const Dataset& train, const AuditConfig& cfg, std::uint64_t seed,
                      const AdversarialObjective* adversary) {
  if (cfg.family == ModelFamily::Flow) {
    FitConfig fc = cfg.flow;
    fc.seed = seed;
    return FittedModel(flow_fit(train, fc, adversary).params);
  }
  GanFitConfig gc = cfg.gan;
  gc.seed = seed;
  return FittedModel(gan_fit(train, gc, adversary).params);
}

}  // namespace

std::string_view to_string(ModelFamily family) { return family == ModelFamily::Flow ? "flow" : "gan"; }

ModelFamily parse_family(std::string_view name) {
  if (name == "flow") return ModelFamily::Flow;
  if (name == "gan") return ModelFamily::Gan;
  throw Error(Errc::ConfigError, "unknown model family '" + std::string(name) + "' (expected flow or gan)");
}

std::string_view to_string(Verdict v) {
  return v == Verdict::IdentifiableWithinTolerance ? "IdentifiableWithinTolerance" : "NonIdentifiable";
}

void AuditConfig::validate() const {
  if (thresholds.size() < 2) throw Error(Errc::ConfigError, "thresholds: at least two are required");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0) || !std::isfinite(thresholds[i])) {
      throw Error(Errc::ConfigError, "thresholds: values must be finite and >= 0");
    }
    if (i > 0 && thresholds[i] < thresholds[i - 1]) throw Error(Errc::ConfigError, "thresholds: must be ascending");
  }
  if (query_count < 100) throw Error(Errc::ConfigError, "query_count: must be at least 100");
  if (normalizer.kind == NormalizerMode::Kind::Fixed && !(normalizer.value > 0.0)) {
    throw Error(Errc::ConfigError, "normalizer: fixed value must be positive");
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw Error(Errc::ConfigError, "holdout_fraction: must lie in (0, 1)");
  }
  if (!(lambda > 0.0)) throw Error(Errc::ConfigError, "lambda: must be positive");
  if (!(error_budget >= 0.0)) throw Error(Errc::ConfigError, "error_budget: must be >= 0");
}

double AuditConfig::effective_fit_tolerance() const {
  if (fit_tolerance >= 0.0) return fit_tolerance;
  return family == ModelFamily::Flow ? kFlowFitTolerance : kGanFitTolerance;
}

QueryBatch draw_queries(const Dataset& data, std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  const auto evidence = draw_rows(rng, data.size(), count);
  const auto intervention = draw_rows(rng, data.size(), count);
  return QueryBatch{gather(data.t, evidence), gather(data.y, evidence), gather(data.t, intervention)};
}

ModelFamily FittedModel::family() const {
  return std::holds_alternative<FlowParams>(params_) ? ModelFamily::Flow : ModelFamily::Gan;
}

Matrix FittedModel::counterfactuals(const QueryBatch& queries) const {
  if (const FlowParams* p = flow()) return flow_counterfactual(*p, queries);
  return gan_counterfactual(*gan(), queries);
}

double FittedModel::generation_loss(const Dataset& holdout, std::uint64_t seed) const {
  if (const FlowParams* p = flow()) return flow_mean_nll(*p, holdout);
  return -normalized_discriminator_loss(heldout_discriminator_loss(*gan(), holdout, seed));
}

Checkpoint FittedModel::checkpoint() const {
  if (const FlowParams* p = flow()) return p->checkpoint();
  return gan()->checkpoint();
}

std::unique_ptr<CounterfactualPredictor> FittedModel::predictor() const {
  if (const FlowParams* p = flow()) return std::make_unique<FlowModel>(*p);
  return std::make_unique<GanModel>(*gan());
}

double disagreement(const FittedModel& a, const FittedModel& b, const QueryBatch& queries, double normalizer) {
  const auto pa = a.predictor();
  const auto pb = b.predictor();
  return counterfactual_agreement(*pa, *pb, to_queries(queries), normalizer).value;
}

double compute_normalizer(const FittedModel& model, const QueryBatch& queries) {
  if (queries.size() == 0) throw Error(Errc::InvalidArgument, "normalizer needs at least one query");
  const double value = (model.counterfactuals(queries) - queries.evidence_y).rowwise().squaredNorm().mean();
  if (!(value >= kMinNormalizer)) {
    throw Error(Errc::DegenerateNormalizer, "counterfactuals coincide with the evidence; normalizer " +
                                                format_double(value) + " is degenerate");
  }
  return value;
}

StepOneResult run_step_one(const Dataset& data, const AuditConfig& cfg) {
  const DatasetSplit split = split_dataset(data, cfg.holdout_fraction, derive_seed(cfg.seeds.step1, kSplitStream));
  FittedModel model = fit_model(split.train, cfg, cfg.seeds.step1, nullptr);
  const double loss = model.generation_loss(split.holdout, derive_seed(cfg.seeds.step1, kLossStream));
  return StepOneResult{std::move(model), loss};
}

AuditContext make_context(const Dataset& data, const StepOneResult& step1, const AuditConfig& cfg) {
  AuditContext ctx;
  ctx.split = split_dataset(data, cfg.holdout_fraction, derive_seed(cfg.seeds.step1, kSplitStream));
  ctx.train_queries = draw_queries(ctx.split.train, cfg.query_count, cfg.seeds.queries);
  ctx.eval_queries = draw_queries(ctx.split.holdout, cfg.query_count, derive_seed(cfg.seeds.queries, kEvalQueryStream));
  ctx.normalizer = cfg.normalizer.kind == NormalizerMode::Kind::Fixed
                       ? cfg.normalizer.value
                       : compute_normalizer(step1.model, ctx.train_queries);
  return ctx;
}

StepTwoResult run_step_two(const AuditContext& ctx, const StepOneResult& step1, double threshold, std::size_t arm,
                           const AuditConfig& cfg) {
  StepTwoResult out;
  out.point.threshold = threshold;
  out.point.generation_loss_step1 = step1.generation_loss;
  try {
    if (!(threshold >= 0.0)) throw Error(Errc::InvalidArgument, "threshold must be >= 0");
    AdversarialObjective objective;
    objective.queries = ctx.train_queries;
    objective.reference = step1.model.counterfactuals(ctx.train_queries);
    objective.normalizer = ctx.normalizer;
    objective.threshold = threshold;
    objective.form = cfg.loss_form;
    objective.lambda = cfg.lambda;

    const std::uint64_t seed = derive_seed(cfg.seeds.step2, arm);
    FittedModel model = fit_model(ctx.split.train, cfg, seed, &objective);
    out.point.achieved_disagreement = disagreement(step1.model, model, ctx.eval_queries, ctx.normalizer);
    out.point.generation_loss = model.generation_loss(ctx.split.holdout, derive_seed(cfg.seeds.step1, kLossStream));
    out.model = std::move(model);
  } catch (const std::exception& e) {
    out.point.error = e.what();
  }
  return out;
}

void finalize_report(AuditReport& report) {
  // Step one itself always fits within tolerance with zero disagreement.
  double worst = 0.0;
  for (const AuditCurvePoint& p : report.curve) {
    if (p.error) continue;
    if (p.generation_loss <= report.generation_loss_step1 + report.fit_tolerance_used) {
      worst = std::max(worst, p.achieved_disagreement);
    }
  }
  report.worst_case_error = worst;
  report.verdict = worst <= report.error_budget ? Verdict::IdentifiableWithinTolerance : Verdict::NonIdentifiable;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("CF_AUDIT_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult sweep(const Dataset& data, const AuditConfig& cfg) {
  cfg.validate();
  data.validate();
  StepOneResult step1 = run_step_one(data, cfg);
  const AuditContext ctx = make_context(data, step1, cfg);

  const std::size_t arms = cfg.thresholds.size();
  std::vector<StepTwoResult> results(arms);
  const std::size_t workers = std::min(arms, cfg.threads > 0 ? cfg.threads : default_thread_count());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < arms; i = next++) {
      results[i] = run_step_two(ctx, step1, cfg.thresholds[i], i, cfg);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  SweepResult out{AuditReport{}, std::move(step1), {}};
  out.report.family = cfg.family;
  out.report.generation_loss_step1 = out.step1.generation_loss;
  out.report.normalizer = ctx.normalizer;
  out.report.fit_tolerance_used = cfg.effective_fit_tolerance();
  out.report.error_budget = cfg.error_budget;
  for (StepTwoResult& r : results) {
    out.report.curve.push_back(r.point);
    out.arms.push_back(std::move(r.model));
  }
  finalize_report(out.report);
  return out;
}

std::string report_to_json(const AuditReport& report) {
  nlohmann::ordered_json j;
  j["family"] = to_string(report.family);
  j["generation_loss_step1"] = report.generation_loss_step1;
  j["normalizer"] = report.normalizer;
  j["fit_tolerance_used"] = report.fit_tolerance_used;
  j["error_budget"] = report.error_budget;
  j["worst_case_error"] = report.worst_case_error;
  j["verdict"] = to_string(report.verdict);
  auto& curve = j["curve"] = nlohmann::ordered_json::array();
  for (const AuditCurvePoint& p : report.curve) {
    nlohmann::ordered_json row;
    row["threshold"] = p.threshold;
    if (p.error) {
      row["error"] = *p.error;
    } else {
      row["achieved_disagreement"] = p.achieved_disagreement;
      row["generation_loss"] = p.generation_loss;
    }
    row["generation_loss_step1"] = p.generation_loss_step1;
    curve.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string curve_to_csv(const AuditReport& report) {
  std::ostringstream os;
  os << "threshold,achieved_disagreement,generation_loss\n";
  for (const AuditCurvePoint& p : report.curve) {
    if (p.error) continue;
    os << format_double(p.threshold) << ',' << format_double(p.achieved_disagreement) << ','
       << format_double(p.generation_loss) << '\n';
  }
  return os.str();
}

}  // namespace cfaudit

#include "cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cfaudit/audit.hpp"
#include "cfaudit/error.hpp"
#include "cfaudit/flow.hpp"
#include "cfaudit/gan.hpp"
#include "cfaudit/scm.hpp"
#include "cli/config.hpp"
#include "cli/manifest.hpp"

namespace cfaudit::cli {
namespace fs = std::filesystem;
namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension(suffix);
  return out;
}

KeyValueConfig load_config(const std::string& path, const std::set<std::string>& allowed) {
  KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  kv.require_known(allowed);
  return kv;
}

void record_config(RunManifest& m, const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values()) m.set_setting(key, value);
}

std::string json_vec(const Vec& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s + "]";
}

std::unique_ptr<CounterfactualPredictor> load_predictor(const std::string& source, std::uint64_t scm_seed) {
  if (fs::is_regular_file(source)) {
    const Checkpoint ckpt = load_checkpoint(source);
    if (ckpt.contains("conditioner.weight")) return std::make_unique<FlowModel>(FlowParams::from_checkpoint(ckpt));
    if (ckpt.contains("generator.0.weight")) return std::make_unique<GanModel>(GanParams::from_checkpoint(ckpt));
    throw Error(Errc::ConfigError, source + " is neither a flow nor a GAN checkpoint");
  }
  return std::make_unique<ScmPredictor>(make_scm(source, scm_seed));
}

struct GenDataArgs {
  std::string scm_id;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::uint64_t scm_seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  RunManifest manifest("gen-data");
  manifest.set_setting("scm", a.scm_id);
  manifest.set_setting("n", std::to_string(a.n));
  manifest.set_seed("seed", a.seed);
  manifest.set_seed("scm_seed", a.scm_seed);
  const Scm scm = make_scm(a.scm_id, a.scm_seed);
  write_text(a.out, dataset_to_csv(sample(scm, a.n, a.seed)));
  manifest.add_artifact(a.out);
  manifest.write(sibling(a.out, ".manifest.json"));
  out << a.out << '\n';
  return kExitOk;
}

struct FitArgs {
  std::string data;
  std::string family = "flow";
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  RunManifest manifest("fit");
  const KeyValueConfig kv = load_config(a.config, fit_keys());
  record_config(manifest, kv);
  manifest.set_setting("family", a.family);
  manifest.set_setting("data", a.data);
  manifest.set_seed("seed", a.seed);
  const ModelFamily family = parse_family(a.family);
  FitConfig flow;
  GanFitConfig gan;
  apply_training_keys(kv, flow, gan);
  const Dataset data = read_dataset(a.data);

  const fs::path ckpt_path = a.out;
  const fs::path log_path = sibling(ckpt_path, ".log.csv");
  if (family == ModelFamily::Flow) {
    if (data.y_dim() != 1) throw Error(Errc::ShapeMismatch, "the flow family needs one outcome column");
    flow.seed = a.seed;
    const FlowFitResult r = flow_fit(data, flow);
    std::string log = "step,nll\n";
    for (std::size_t i = 0; i < r.nll_log.size(); ++i) log += std::to_string(i) + ',' + format_double(r.nll_log[i]) + '\n';
    write_text(ckpt_path, checkpoint_to_json(r.params.checkpoint()));
    write_text(log_path, log);
    manifest.set_metric("final_nll", flow_mean_nll(r.params, data));
  } else {
    gan.seed = a.seed;
    const GanFitResult r = gan_fit(data, gan);
    write_text(ckpt_path, checkpoint_to_json(r.params.checkpoint()));
    write_text(log_path, gan_log_to_csv(r.log));
    if (!r.log.empty()) manifest.set_metric("final_d_loss", r.log.back().d_loss);
    manifest.set_metric("normalized_discriminator_loss",
                        normalized_discriminator_loss(heldout_discriminator_loss(r.params, data, a.seed)));
  }
  manifest.add_artifact(ckpt_path);
  manifest.add_artifact(log_path);
  manifest.write(sibling(ckpt_path, ".manifest.json"));
  out << ckpt_path.generic_string() << '\n';
  return kExitOk;
}

struct AuditArgs {
  std::string data;
  std::string family = "flow";
  std::string thresholds;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_audit(const AuditArgs& a, std::ostream& out) {
  RunManifest manifest("audit");
  const std::vector<double> thresholds = parse_real_list(a.thresholds);
  if (thresholds.size() < 2) throw Error(Errc::UsageError, "--thresholds needs at least two values");
  const KeyValueConfig kv = load_config(a.config, audit_keys());
  record_config(manifest, kv);
  manifest.set_setting("family", a.family);
  manifest.set_setting("data", a.data);
  manifest.set_setting("thresholds", a.thresholds);

  AuditConfig cfg;
  cfg.family = parse_family(a.family);
  cfg.thresholds = thresholds;
  cfg.seeds = AuditSeeds{a.seed, a.seed + 1, a.seed + 2};
  apply_audit_keys(kv, cfg);
  manifest.set_seed("step1", cfg.seeds.step1);
  manifest.set_seed("step2", cfg.seeds.step2);
  manifest.set_seed("queries", cfg.seeds.queries);

  const SweepResult result = sweep(read_dataset(a.data), cfg);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_text(dir / "report.json", report_to_json(result.report));
  manifest.add_artifact(dir / "report.json");
  write_text(dir / "curve.csv", curve_to_csv(result.report));
  manifest.add_artifact(dir / "curve.csv");
  write_text(dir / "step1.json", checkpoint_to_json(result.step1.model.checkpoint()));
  manifest.add_artifact(dir / "step1.json");
  bool complete = true;
  for (std::size_t i = 0; i < result.arms.size(); ++i) {
    if (!result.arms[i]) {
      complete = false;
      continue;
    }
    const fs::path arm = dir / ("arm_" + std::to_string(i) + ".json");
    write_text(arm, checkpoint_to_json(result.arms[i]->checkpoint()));
    manifest.add_artifact(arm);
  }
  manifest.set_metric("worst_case_error", result.report.worst_case_error);
  manifest.set_metric("generation_loss_step1", result.report.generation_loss_step1);
  manifest.write(dir / "manifest.json");
  out << to_string(result.report.verdict) << " worst_case_error=" << format_double(result.report.worst_case_error)
      << '\n';
  return complete ? kExitOk : kExitFailure;
}

struct CfArgs {
  std::string model;
  std::string t, y, t_prime;
  std::uint64_t scm_seed = 0;
};

int cmd_cf(const CfArgs& a, std::ostream& out) {
  const auto predictor = load_predictor(a.model, a.scm_seed);
  const CounterfactualQuery q{parse_real_list(a.t), parse_real_list(a.y), parse_real_list(a.t_prime)};
  const Vec u = predictor->abduct(q.evidence_t, q.evidence_y);
  const Vec y_cf = predictor->counterfactual(q);
  out << "{\"counterfactual\":" << json_vec(y_cf) << ",\"exogenous\":" << json_vec(u) << "}\n";
  return kExitOk;
}

int cmd_zoo_list(std::ostream& out) {
  for (const std::string& id : zoo_ids()) out << id << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual identifiability audits for deep structural causal models", "cfaudit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample a dataset from a built-in SCM");
  gen_cmd->add_option("scm", gen.scm_id, "SCM id (see zoo-list)")->required();
  gen_cmd->add_option("-n,--n", gen.n, "Number of rows")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Sampling seed");
  gen_cmd->add_option("--scm-seed", gen.scm_seed, "Construction seed for nonident-2d");
  gen_cmd->add_option("--out", gen.out, "Output CSV")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a flow or GAN to a dataset");
  fit_cmd->add_option("data", fit.data, "Dataset CSV")->required();
  fit_cmd->add_option("--family", fit.family, "flow or gan")->check(CLI::IsMember({"flow", "gan"}));
  fit_cmd->add_option("--config", fit.config, "key = value config file");
  fit_cmd->add_option("--seed", fit.seed, "Training seed");
  fit_cmd->add_option("--out", fit.out, "Checkpoint JSON")->required();

  AuditArgs audit;
  auto* audit_cmd = app.add_subcommand("audit", "Run the two-step worst-case counterfactual audit");
  audit_cmd->add_option("data", audit.data, "Dataset CSV")->required();
  audit_cmd->add_option("--family", audit.family, "flow or gan")->check(CLI::IsMember({"flow", "gan"}));
  audit_cmd->add_option("--thresholds", audit.thresholds, "Comma-separated disagreement thresholds")->required();
  audit_cmd->add_option("--config", audit.config, "key = value config file");
  audit_cmd->add_option("--seed", audit.seed, "Base seed");
  audit_cmd->add_option("--out", audit.out, "Output directory")->required();

  CfArgs cf;
  auto* cf_cmd = app.add_subcommand("cf", "Answer one counterfactual query");
  cf_cmd->add_option("model", cf.model, "Checkpoint path or SCM id")->required();
  cf_cmd->add_option("--t", cf.t, "Evidence parents (comma list)")->required();
  cf_cmd->add_option("--y", cf.y, "Evidence outcome (comma list)")->required();
  cf_cmd->add_option("--t-prime", cf.t_prime, "Intervention parents (comma list)")->required();
  cf_cmd->add_option("--scm-seed", cf.scm_seed, "Construction seed for nonident-2d");

  auto* zoo_cmd = app.add_subcommand("zoo-list", "List built-in SCM ids");

  std::vector<std::string> argv_store{"cfaudit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (audit_cmd->parsed()) return cmd_audit(audit, out);
    if (cf_cmd->parsed()) return cmd_cf(cf, out);
    if (zoo_cmd->parsed()) return cmd_zoo_list(out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::UsageError ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cfaudit::cli

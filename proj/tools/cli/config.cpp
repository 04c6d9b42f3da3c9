#include "cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cfaudit/error.hpp"

namespace cfaudit::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(Errc::ConfigError, "config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

template <typename T>
void maybe_set(const KeyValueConfig& kv, const std::string& key, T& target) {
  const auto it = kv.values().find(key);
  if (it != kv.values().end()) target = parse_number<T>(key, it->second);
}

const std::set<std::string> kFlowKeys{"flow.steps", "flow.batch_size", "flow.lr"};
const std::set<std::string> kGanKeys{"gan.steps",          "gan.batch_size",   "gan.lr_g",  "gan.lr_d",
                                     "gan.disc_steps_per_gen", "gan.cycle_weight", "gan.width", "gan.depth",
                                     "gan.u_dim",          "gan.log_every",    "gan.adversary_ramp"};
const std::set<std::string> kAuditKeys{"query_count",  "lambda",        "loss_form",        "normalizer",
                                       "fit_tolerance", "error_budget", "holdout_fraction", "threads",
                                       "seed_step1",    "seed_step2",   "seed_queries"};

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::ConfigError, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw Error(Errc::ConfigError, "config line " + std::to_string(line_no) + ": empty key");
    if (!cfg.values_.emplace(key, value).second) {
      throw Error(Errc::ConfigError, "config key '" + key + "' appears twice");
    }
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (!allowed.contains(key)) throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
  }
}

std::set<std::string> fit_keys() {
  std::set<std::string> keys = kFlowKeys;
  keys.insert(kGanKeys.begin(), kGanKeys.end());
  return keys;
}

std::set<std::string> audit_keys() {
  std::set<std::string> keys = fit_keys();
  keys.insert(kAuditKeys.begin(), kAuditKeys.end());
  return keys;
}

void apply_training_keys(const KeyValueConfig& kv, FitConfig& flow, GanFitConfig& gan) {
  maybe_set(kv, "flow.steps", flow.steps);
  maybe_set(kv, "flow.batch_size", flow.batch_size);
  maybe_set(kv, "flow.lr", flow.lr);
  maybe_set(kv, "gan.steps", gan.steps);
  maybe_set(kv, "gan.batch_size", gan.batch_size);
  maybe_set(kv, "gan.lr_g", gan.lr_g);
  maybe_set(kv, "gan.lr_d", gan.lr_d);
  maybe_set(kv, "gan.disc_steps_per_gen", gan.disc_steps_per_gen);
  maybe_set(kv, "gan.cycle_weight", gan.cycle_weight);
  maybe_set(kv, "gan.width", gan.width);
  maybe_set(kv, "gan.depth", gan.depth);
  maybe_set(kv, "gan.u_dim", gan.u_dim);
  maybe_set(kv, "gan.log_every", gan.log_every);
  maybe_set(kv, "gan.adversary_ramp", gan.adversary_ramp);
  if (flow.steps == 0 || flow.batch_size == 0 || !(flow.lr > 0)) {
    throw Error(Errc::ConfigError, "config keys 'flow.*' must be positive");
  }
  if (gan.steps == 0 || gan.batch_size == 0 || !(gan.lr_g > 0) || !(gan.lr_d > 0) || gan.width <= 0 ||
      gan.depth <= 0 || gan.u_dim <= 0 || gan.disc_steps_per_gen == 0 || gan.cycle_weight < 0 ||
      !(gan.adversary_ramp >= 0 && gan.adversary_ramp <= 1)) {
    throw Error(Errc::ConfigError, "config keys 'gan.*' must be positive");
  }
}

void apply_audit_keys(const KeyValueConfig& kv, AuditConfig& cfg) {
  apply_training_keys(kv, cfg.flow, cfg.gan);
  maybe_set(kv, "query_count", cfg.query_count);
  maybe_set(kv, "lambda", cfg.lambda);
  maybe_set(kv, "fit_tolerance", cfg.fit_tolerance);
  maybe_set(kv, "error_budget", cfg.error_budget);
  maybe_set(kv, "holdout_fraction", cfg.holdout_fraction);
  maybe_set(kv, "threads", cfg.threads);
  maybe_set(kv, "seed_step1", cfg.seeds.step1);
  maybe_set(kv, "seed_step2", cfg.seeds.step2);
  maybe_set(kv, "seed_queries", cfg.seeds.queries);
  if (const auto it = kv.values().find("loss_form"); it != kv.values().end()) {
    if (it->second == "threshold") {
      cfg.loss_form = SecondStepLoss::Threshold;
    } else if (it->second == "lagrangian") {
      cfg.loss_form = SecondStepLoss::Lagrangian;
    } else {
      throw Error(Errc::ConfigError, "config key 'loss_form': expected threshold or lagrangian");
    }
  }
  if (const auto it = kv.values().find("normalizer"); it != kv.values().end()) {
    cfg.normalizer = it->second == "cf_vs_evidence" ? NormalizerMode::cf_vs_evidence()
                                                    : NormalizerMode::fixed(parse_number<double>("normalizer", it->second));
  }
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  while (true) {
    const auto comma = text.find(',');
    const std::string item(trim(text.substr(0, comma)));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw Error(Errc::UsageError, "cannot parse '" + item + "' as a number");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

}  // namespace cfaudit::cli

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "cfaudit/audit.hpp"

namespace cfaudit::cli {

/// Flat "key = value" file; blank lines and text after '#' are ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  const std::map<std::string, std::string>& values() const { return values_; }
  bool empty() const { return values_.empty(); }

  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Keys accepted by `fit`: flow.* and gan.* training settings.
std::set<std::string> fit_keys();
/// Keys accepted by `audit`: fit_keys() plus the audit settings.
std::set<std::string> audit_keys();

/// Applies recognised keys onto `cfg`; values that do not parse raise
/// ConfigError naming the key.
void apply_training_keys(const KeyValueConfig& kv, FitConfig& flow, GanFitConfig& gan);
void apply_audit_keys(const KeyValueConfig& kv, AuditConfig& cfg);

/// Comma-separated reals; throws UsageError on malformed input.
std::vector<double> parse_real_list(std::string_view text);

}  // namespace cfaudit::cli

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cfaudit::cli {

/// Record of one command invocation. Everything except started_at and
/// wall_clock_seconds is a function of the inputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_setting(const std::string& key, const std::string& value) { settings_[key] = value; }
  void set_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void set_metric(const std::string& name, double value) { metrics_[name] = value; }
  void add_artifact(const std::filesystem::path& path) { artifacts_.push_back(path.generic_string()); }
  const std::vector<std::string>& artifacts() const { return artifacts_; }

  std::string to_json() const;
  /// Must be the last file a command writes.
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::map<std::string, std::string> settings_;
  std::map<std::string, std::uint64_t> seeds_;
  std::map<std::string, double> metrics_;
  std::vector<std::string> artifacts_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point started_steady_;
};

}  // namespace cfaudit::cli

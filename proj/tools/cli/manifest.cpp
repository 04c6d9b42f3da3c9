#include "cli/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "cfaudit/error.hpp"
#include "cfaudit/version.hpp"

namespace cfaudit::cli {

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)),
      started_(std::chrono::system_clock::now()),
      started_steady_(std::chrono::steady_clock::now()) {}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["library_version"] = kVersion;
  j["config"] = settings_;
  j["seeds"] = seeds_;
  j["metrics"] = metrics_;
  j["artifacts"] = artifacts_;

  const std::time_t t = std::chrono::system_clock::to_time_t(started_);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  j["started_at"] = stamp;
  j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_steady_).count();
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write manifest " + path.string());
  out << to_json();
  if (!out) throw Error(Errc::IoError, "failed writing manifest " + path.string());
}

}  // namespace cfaudit::cli

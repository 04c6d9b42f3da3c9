#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfaudit {

enum class Errc {
  InvalidArgument,
  NoInverse,
  AbductionFailed,
  NotRotationInvariant,
  FinetuneFailed,
  TooFewSamples,
  ShapeMismatch,
  NonScalarLoss,
  NonFinite,
  OutOfSupport,
  DegenerateNormalizer,
  UnknownScm,
  ConfigError,
  IoError,
  UsageError,
};

std::string_view to_string(Errc code) noexcept;

/// Library-wide exception; `code()` distinguishes the failure classes callers
/// are expected to handle (e.g. AbductionFailed during query evaluation).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cfaudit

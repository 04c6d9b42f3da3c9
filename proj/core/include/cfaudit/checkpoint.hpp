#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "cfaudit/tensor.hpp"

namespace cfaudit {

/// name -> row-major values. Serialized as JSON
/// {"<name>": {"shape": [rows, cols], "values": [...]}, ...}.
using Checkpoint = std::map<std::string, Matrix>;

Checkpoint make_checkpoint(std::span<const Parameter* const> params);
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values for every parameter whose name is present; throws
/// ConfigError on a missing key and ShapeMismatch on a shape mismatch.
void restore_parameters(const Checkpoint& ckpt, std::span<Parameter* const> params);

}  // namespace cfaudit

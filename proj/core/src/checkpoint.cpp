#include "cfaudit/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfaudit/error.hpp"

namespace cfaudit {

Checkpoint make_checkpoint(std::span<const Parameter* const> params) {
  Checkpoint out;
  for (const Parameter* p : params) out[p->name] = p->value;
  return out;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, m] : ckpt) {
    nlohmann::ordered_json entry;
    entry["shape"] = {m.rows(), m.cols()};
    entry["values"] = std::vector<double>(m.data(), m.data() + m.size());
    j[name] = std::move(entry);
  }
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::IoError, "checkpoint root must be an object");
  for (const auto& [name, entry] : j.items()) {
    if (!entry.contains("shape") || !entry.contains("values")) {
      throw Error(Errc::IoError, "checkpoint entry '" + name + "' lacks shape/values");
    }
    const auto rows = entry["shape"].at(0).get<Eigen::Index>();
    const auto cols = entry["shape"].at(1).get<Eigen::Index>();
    const auto values = entry["values"].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw Error(Errc::ShapeMismatch, "checkpoint entry '" + name + "' has wrong value count");
    }
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data());
    out[name] = std::move(m);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  os << checkpoint_to_json(ckpt);
  if (!os) throw Error(Errc::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return checkpoint_from_json(ss.str());
}

void restore_parameters(const Checkpoint& ckpt, std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    auto it = ckpt.find(p->name);
    if (it == ckpt.end()) throw Error(Errc::ConfigError, "checkpoint has no key " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw Error(Errc::ShapeMismatch, "checkpoint shape differs for " + p->name);
    }
    p->value = it->second;
    p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
  }
}

}  // namespace cfaudit

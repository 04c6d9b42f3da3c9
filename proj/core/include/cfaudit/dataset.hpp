#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "cfaudit/matrix.hpp"

namespace cfaudit {

/// Observational samples of (parents, outcome) for one node.
struct Dataset {
  Matrix t;
  Matrix y;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(t.rows()); }
  Eigen::Index t_dim() const { return t.cols(); }
  Eigen::Index y_dim() const { return y.cols(); }

  /// Throws InvalidArgument on row-count mismatch or non-finite entries.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct DatasetSplit {
  Dataset train;
  Dataset holdout;
};

/// Deterministic shuffled split; holdout receives round(n * fraction) rows.
DatasetSplit split_dataset(const Dataset& data, double holdout_fraction, std::uint64_t seed);

/// Shortest round-trip decimal representation.
std::string format_double(double x);

/// CSV with header "t_0,...,t_{k-1},y_0,...,y_{m-1}".
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace cfaudit

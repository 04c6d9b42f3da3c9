#pragma once

#include <Eigen/Core>
#include <vector>

namespace cfaudit {

/// Row-major dense matrix; rows are samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A single parent or outcome value (one row).
using Vec = std::vector<double>;

inline Vec row_of(const Matrix& m, Eigen::Index r) {
  return Vec(m.row(r).data(), m.row(r).data() + m.cols());
}

inline Matrix as_row(const Vec& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

/// Elementwise tanh through the vectorized exponential; agrees with std::tanh
/// to a few ulp and saturates correctly for large |x|.
template <typename Derived>
Matrix tanh_of(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix();
}

}  // namespace cfaudit

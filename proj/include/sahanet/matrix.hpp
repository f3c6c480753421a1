#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sahanet {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double* row(std::size_t r) { return values.data() + r * cols; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }
};

/// Copies the named columns of `m` in the given order, preserving rows.
inline Matrix select_columns(const Matrix& m, const std::vector<int>& cols) {
  for (int c : cols) {
    if (c < 0 || static_cast<std::size_t>(c) >= m.cols)
      throw std::out_of_range("select_columns: column index out of range");
  }
  Matrix out(m.rows, cols.size());
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* src = m.row(r);
    double* dst = out.row(r);
    for (std::size_t k = 0; k < cols.size(); ++k) dst[k] = src[cols[k]];
  }
  return out;
}

}  // namespace sahanet

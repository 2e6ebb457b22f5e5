#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ecl {

// Dense row-major double matrix. Row vectors are 1 x n, column vectors n x 1,
// scalars 1 x 1.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  Matrix(int r, int c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    assert(data.size() == static_cast<std::size_t>(r) * c);
  }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix full(int r, int c, double v) {
    Matrix m(r, c);
    for (double& x : m.data) x = v;
    return m;
  }
  static Matrix scalar(double v) { return Matrix(1, 1, {v}); }

  int size() const { return rows * cols; }
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline int argmax_row(const Matrix& m, int i) {
  int best = 0;
  for (int j = 1; j < m.cols; ++j)
    if (m.at(i, j) > m.at(i, best)) best = j;
  return best;
}

}  // namespace ecl

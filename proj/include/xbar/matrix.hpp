#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xbar/error.hpp"

namespace xbar {

// Dense row-major matrix. Everything in this project is small enough that a
// flat vector with explicit loops beats pulling in a linear-algebra library.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> d;

  Mat() = default;
  Mat(int r, int c, T fill = T(0))
      : rows(r), cols(c), d(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  T& operator()(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const {
    return d[static_cast<size_t>(r) * cols + c];
  }

  bool empty() const { return rows == 0 || cols == 0; }
  size_t size() const { return d.size(); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

using MatD = Mat<double>;
using MatI = Mat<int32_t>;

inline MatD matmul(const MatD& a, const MatD& b) {
  if (a.cols != b.rows)
    throw Error(errc::dimension, "matmul: " + std::to_string(a.cols) + " vs " +
                                     std::to_string(b.rows));
  // Plain ascending-k accumulation; every execution path in this project uses
  // the same order so double-precision results compare bit-for-bit.
  MatD c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline MatD transpose(const MatD& a) {
  MatD t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_abs(const MatD& a) {
  double m = 0.0;
  for (double v : a.d) m = std::max(m, std::fabs(v));
  return m;
}

inline double max_abs_diff(const MatD& a, const MatD& b) {
  if (!a.same_shape(b)) throw Error(errc::dimension, "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.d.size(); ++i) m = std::max(m, std::fabs(a.d[i] - b.d[i]));
  return m;
}

// Horizontal concatenation [a | b].
inline MatD hcat(const MatD& a, const MatD& b) {
  if (a.rows != b.rows) throw Error(errc::dimension, "hcat: row mismatch");
  MatD c(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) c(i, j) = a(i, j);
    for (int j = 0; j < b.cols; ++j) c(i, a.cols + j) = b(i, j);
  }
  return c;
}

// Column slice [first, first+count).
inline MatD col_slice(const MatD& a, int first, int count) {
  if (first < 0 || first + count > a.cols)
    throw Error(errc::dimension, "col_slice out of range");
  MatD s(a.rows, count);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < count; ++j) s(i, j) = a(i, first + j);
  return s;
}

inline std::vector<double> get_col(const MatD& a, int j) {
  std::vector<double> v(a.rows);
  for (int i = 0; i < a.rows; ++i) v[i] = a(i, j);
  return v;
}

inline std::vector<double> get_row(const MatD& a, int i) {
  std::vector<double> v(a.cols);
  for (int j = 0; j < a.cols; ++j) v[j] = a(i, j);
  return v;
}

}  // namespace xbar

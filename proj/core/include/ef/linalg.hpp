/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_LINALG_HPP_
#define EF_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ef {

/// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return a.size(); }
};

/// y = A x. The optional counter accumulates multiply count.
inline void matvec(const Matrix& A, std::span<const double> x, std::span<double> y,
                   std::size_t* mults = nullptr) {
  if (static_cast<int>(x.size()) != A.cols || static_cast<int>(y.size()) != A.rows)
    throw std::invalid_argument("matvec: dimension mismatch");
  for (int r = 0; r < A.rows; ++r) {
    double acc = 0.0;
    const double* row = A.a.data() + static_cast<std::size_t>(r) * A.cols;
    for (int c = 0; c < A.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  if (mults) *mults += static_cast<std::size_t>(A.rows) * A.cols;
}

/// y += A^T x.
inline void matvec_transpose_add(const Matrix& A, std::span<const double> x,
                                 std::span<double> y) {
  if (static_cast<int>(x.size()) != A.rows || static_cast<int>(y.size()) != A.cols)
    throw std::invalid_argument("matvec_transpose_add: dimension mismatch");
  for (int r = 0; r < A.rows; ++r) {
    const double* row = A.a.data() + static_cast<std::size_t>(r) * A.cols;
    double xr = x[r];
    if (xr == 0.0) continue;
    for (int c = 0; c < A.cols; ++c) y[c] += row[c] * xr;
  }
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace ef

#endif  // EF_LINALG_HPP_

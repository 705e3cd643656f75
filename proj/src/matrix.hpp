// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace grusnf {

/// Row-major dense matrix of doubles. Batched quantities keep one sample per
/// row, so a batch of B vectors in R^d is a B x d matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix row(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  bool all_finite() const noexcept;
  bool same_shape(const DenseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Plain (untaped) kernels. The taped operations in tape.hpp compute their
// values with exactly these functions, so both paths agree bitwise.

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ · b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a · bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
/// Adds the 1 x c row `bias` to every row of `a`.
DenseMatrix add_row(const DenseMatrix& a, const DenseMatrix& bias);
DenseMatrix scale(const DenseMatrix& a, double s);
DenseMatrix shift(const DenseMatrix& a, double s);

DenseMatrix sigmoid(const DenseMatrix& a);
DenseMatrix tanh(const DenseMatrix& a);
DenseMatrix exp(const DenseMatrix& a);
DenseMatrix abs(const DenseMatrix& a);
DenseMatrix square(const DenseMatrix& a);

DenseMatrix gather_cols(const DenseMatrix& a, std::span<const std::size_t> cols);
/// Builds a matrix with `total_cols` columns from two column-disjoint parts.
DenseMatrix scatter_cols(const DenseMatrix& a, std::span<const std::size_t> a_cols,
                         const DenseMatrix& b, std::span<const std::size_t> b_cols,
                         std::size_t total_cols);
DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b);
/// r x c -> r x 1
DenseMatrix row_sum(const DenseMatrix& a);
/// r x c -> 1 x 1
DenseMatrix sum(const DenseMatrix& a);
DenseMatrix transpose(const DenseMatrix& a);
/// Repeats the 1 x c row `r` times.
DenseMatrix repeat_row(const DenseMatrix& row, std::size_t times);

double squared_norm(std::span<const double> v);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace grusnf

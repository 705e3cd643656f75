// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "errors.hpp"

namespace grusnf {
namespace {

std::string shape_str(const DenseMatrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <class F>
DenseMatrix map(const DenseMatrix& a, F f) {
  DenseMatrix out(a.rows(), a.cols());
  auto in = a.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) dst[i] = f(in[i]);
  return out;
}

template <class F>
DenseMatrix zip(const DenseMatrix& a, const DenseMatrix& b, const char* op, F f) {
  require_same_shape(a, b, op);
  DenseMatrix out(a.rows(), a.cols());
  auto x = a.values();
  auto y = b.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("value count " + std::to_string(values_.size()) + " for " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged initializer list");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::row(std::span<const double> values) {
  return DenseMatrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

// Each output entry accumulates over k in ascending order regardless of how
// many rows `a` has, so a batched product equals the row-by-row products.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " x " + shape_str(b));
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  DenseMatrix out(n, m);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = pa[i * inner + k];
      const double* brow = pb + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_str(a) + "^T x " + shape_str(b));
  }
  const std::size_t n = a.cols(), inner = a.rows(), m = b.cols();
  DenseMatrix out(n, m);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t k = 0; k < inner; ++k) {
    const double* arow = pa + k * n;
    const double* brow = pb + k * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aki = arow[i];
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a) + " x " + shape_str(b) + "^T");
  }
  const std::size_t n = a.rows(), inner = a.cols(), m = b.rows();
  DenseMatrix out(n, m);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * inner;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = pb + j * inner;
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * brow[k];
      po[i * m + j] = acc;
    }
  }
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

DenseMatrix add_row(const DenseMatrix& a, const DenseMatrix& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw ShapeError("add_row: " + shape_str(a) + " + " + shape_str(bias));
  }
  DenseMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = out.row_span(r);
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += bias[c];
  }
  return out;
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  return map(a, [s](double x) { return x * s; });
}

DenseMatrix shift(const DenseMatrix& a, double s) {
  return map(a, [s](double x) { return x + s; });
}

DenseMatrix sigmoid(const DenseMatrix& a) {
  return map(a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

DenseMatrix tanh(const DenseMatrix& a) {
  return map(a, [](double x) { return std::tanh(x); });
}

DenseMatrix exp(const DenseMatrix& a) {
  return map(a, [](double x) { return std::exp(x); });
}

DenseMatrix abs(const DenseMatrix& a) {
  return map(a, [](double x) { return std::fabs(x); });
}

DenseMatrix square(const DenseMatrix& a) {
  return map(a, [](double x) { return x * x; });
}

DenseMatrix gather_cols(const DenseMatrix& a, std::span<const std::size_t> cols) {
  DenseMatrix out(a.rows(), cols.size());
  for (std::size_t c : cols) {
    if (c >= a.cols()) throw ShapeError("gather_cols: column out of range");
  }
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = a(r, cols[j]);
  }
  return out;
}

DenseMatrix scatter_cols(const DenseMatrix& a, std::span<const std::size_t> a_cols,
                         const DenseMatrix& b, std::span<const std::size_t> b_cols,
                         std::size_t total_cols) {
  if (a.cols() != a_cols.size() || b.cols() != b_cols.size() || a.rows() != b.rows() ||
      a_cols.size() + b_cols.size() != total_cols) {
    throw ShapeError("scatter_cols: inconsistent column sets");
  }
  DenseMatrix out(a.rows(), total_cols);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t j = 0; j < a_cols.size(); ++j) out(r, a_cols[j]) = a(r, j);
    for (std::size_t j = 0; j < b_cols.size(); ++j) out(r, b_cols[j]) = b(r, j);
  }
  return out;
}

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("hcat: " + shape_str(a) + " | " + shape_str(b));
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row_span(r);
    auto ra = a.row_span(r);
    auto rb = b.row_span(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

DenseMatrix row_sum(const DenseMatrix& a) {
  DenseMatrix out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double acc = 0.0;
    for (double v : a.row_span(r)) acc += v;
    out[r] = acc;
  }
  return out;
}

DenseMatrix sum(const DenseMatrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return DenseMatrix(1, 1, acc);
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

DenseMatrix repeat_row(const DenseMatrix& row, std::size_t times) {
  if (row.rows() != 1) throw ShapeError("repeat_row: expected a single row");
  DenseMatrix out(times, row.cols());
  for (std::size_t r = 0; r < times; ++r) {
    std::copy(row.values().begin(), row.values().end(), out.row_span(r).begin());
  }
  return out;
}

double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("euclidean_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace grusnf

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "recurrent.hpp"

#include <cmath>
#include <string>

namespace grusnf {
namespace {

DenseMatrix uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

void expect_shape(const DenseMatrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string("gru parameter ") + name + " is " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
}

}  // namespace

GruParams init_gru(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  const std::size_t d = input_dim, h = hidden_dim;
  GruParams p;
  p.w_r = uniform(d, h, bound, rng);
  p.w_z = uniform(d, h, bound, rng);
  p.w_h = uniform(d, h, bound, rng);
  p.u_r = uniform(h, h, bound, rng);
  p.u_z = uniform(h, h, bound, rng);
  p.u_h = uniform(h, h, bound, rng);
  p.b_r = uniform(1, h, bound, rng);
  p.b_z = uniform(1, h, bound, rng);
  p.b_h = uniform(1, h, bound, rng);
  p.w_o = uniform(h, d, bound, rng);
  p.b_o = uniform(1, d, bound, rng);
  return p;
}

GruParams zero_gru(std::size_t input_dim, std::size_t hidden_dim) {
  const std::size_t d = input_dim, h = hidden_dim;
  return {DenseMatrix(d, h), DenseMatrix(d, h), DenseMatrix(d, h),
          DenseMatrix(h, h), DenseMatrix(h, h), DenseMatrix(h, h),
          DenseMatrix(1, h), DenseMatrix(1, h), DenseMatrix(1, h),
          DenseMatrix(h, d), DenseMatrix(1, d)};
}

std::size_t gru_input_dim(const GruParams& p) { return p.w_r.rows(); }
std::size_t gru_hidden_dim(const GruParams& p) { return p.w_r.cols(); }

void validate_gru(const GruParams& p) {
  const std::size_t d = gru_input_dim(p), h = gru_hidden_dim(p);
  expect_shape(p.w_r, d, h, "w_r");
  expect_shape(p.w_z, d, h, "w_z");
  expect_shape(p.w_h, d, h, "w_h");
  expect_shape(p.u_r, h, h, "u_r");
  expect_shape(p.u_z, h, h, "u_z");
  expect_shape(p.u_h, h, h, "u_h");
  expect_shape(p.b_r, 1, h, "b_r");
  expect_shape(p.b_z, 1, h, "b_z");
  expect_shape(p.b_h, 1, h, "b_h");
  expect_shape(p.w_o, h, d, "w_o");
  expect_shape(p.b_o, 1, d, "b_o");
}

DenseMatrix gru_step(const DenseMatrix& y_prev, const DenseMatrix& h_prev, const GruParams& p) {
  if (y_prev.cols() != gru_input_dim(p) || h_prev.cols() != gru_hidden_dim(p) ||
      y_prev.rows() != h_prev.rows()) {
    throw ShapeError("gru_cell: input " + std::to_string(y_prev.rows()) + "x" +
                     std::to_string(y_prev.cols()) + ", state " + std::to_string(h_prev.rows()) +
                     "x" + std::to_string(h_prev.cols()));
  }
  DenseMatrix h = gru_cell(y_prev, h_prev, p);
  if (!h.all_finite()) throw NumericError("gru_cell produced a non-finite state");
  return h;
}

DenseMatrix predict(const DenseMatrix& h, const GruParams& p) {
  if (h.cols() != gru_hidden_dim(p)) throw ShapeError("readout: state width mismatch");
  return readout(h, p);
}

DenseMatrix encode_window(const DenseMatrix& window, const GruParams& p, const DenseMatrix& h0) {
  if (window.rows() == 0) throw ContractError("encode_window: empty window");
  DenseMatrix h = h0;
  for (std::size_t t = 0; t < window.rows(); ++t) {
    h = gru_step(DenseMatrix::row(window.row_span(t)), h, p);
  }
  return h;
}

}  // namespace grusnf

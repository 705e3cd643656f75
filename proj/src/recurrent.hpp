// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"
#include "tape.hpp"

namespace grusnf {

/// GRU weights in row-vector convention: inputs are B x d, states B x H.
/// Instantiated with DenseMatrix for inference and Var for taped training.
template <class M>
struct GruWeights {
  M w_r, w_z, w_h;  // d x H
  M u_r, u_z, u_h;  // H x H
  M b_r, b_z, b_h;  // 1 x H
  M w_o;            // H x d readout
  M b_o;            // 1 x d
};

using GruParams = GruWeights<DenseMatrix>;

/// Applies `f(name, member)` to every weight in checkpoint order.
template <class W, class F>
void for_each_weight(W& w, F&& f) {
  f("w_r", w.w_r); f("w_z", w.w_z); f("w_h", w.w_h);
  f("u_r", w.u_r); f("u_z", w.u_z); f("u_h", w.u_h);
  f("b_r", w.b_r); f("b_z", w.b_z); f("b_h", w.b_h);
  f("w_o", w.w_o); f("b_o", w.b_o);
}

template <class Out, class In, class F>
GruWeights<Out> map_weights(const GruWeights<In>& in, F&& f) {
  return {f(in.w_r), f(in.w_z), f(in.w_h), f(in.u_r), f(in.u_z), f(in.u_h),
          f(in.b_r), f(in.b_z), f(in.b_h), f(in.w_o), f(in.b_o)};
}

/// Uniform(-1/sqrt(H), 1/sqrt(H)) for every weight and bias.
GruParams init_gru(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
GruParams zero_gru(std::size_t input_dim, std::size_t hidden_dim);

std::size_t gru_input_dim(const GruParams& p);
std::size_t gru_hidden_dim(const GruParams& p);
void validate_gru(const GruParams& p);

/// One GRU update, h' = (1 - z) * h + z * h_cand, written as h + z * (h_cand - h).
template <class M>
M gru_cell(const M& y_prev, const M& h_prev, const GruWeights<M>& p) {
  const M r = sigmoid(add_row(add(matmul(y_prev, p.w_r), matmul(h_prev, p.u_r)), p.b_r));
  const M z = sigmoid(add_row(add(matmul(y_prev, p.w_z), matmul(h_prev, p.u_z)), p.b_z));
  const M cand =
      tanh(add_row(add(matmul(y_prev, p.w_h), matmul(hadamard(r, h_prev), p.u_h)), p.b_h));
  return add(h_prev, hadamard(z, sub(cand, h_prev)));
}

/// Deterministic point prediction W_o h + b_o used as the target-energy anchor.
template <class M>
M readout(const M& h, const GruWeights<M>& p) {
  return add_row(matmul(h, p.w_o), p.b_o);
}

/// Checked single-state entry points.
DenseMatrix gru_step(const DenseMatrix& y_prev, const DenseMatrix& h_prev, const GruParams& p);
DenseMatrix predict(const DenseMatrix& h, const GruParams& p);

/// Folds gru_cell over the rows of `window` (T x d) in time order, starting
/// from `h0` (1 x H).
DenseMatrix encode_window(const DenseMatrix& window, const GruParams& p, const DenseMatrix& h0);

}  // namespace grusnf

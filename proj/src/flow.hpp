// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"
#include "tape.hpp"

namespace grusnf {

/// Conditioner weights of one affine coupling layer. Both the scale and the
/// shift conditioner are one-hidden-layer tanh perceptrons on [x_pass, h].
template <class M>
struct CouplingWeights {
  M s_w1, s_b1, s_w2, s_b2;
  M t_w1, t_b1, t_w2, t_b2;
};

template <class W, class F>
void for_each_weight(CouplingWeights<W>& w, F&& f) {
  f("s_w1", w.s_w1); f("s_b1", w.s_b1); f("s_w2", w.s_w2); f("s_b2", w.s_b2);
  f("t_w1", w.t_w1); f("t_b1", w.t_b1); f("t_w2", w.t_w2); f("t_b2", w.t_b2);
}

template <class Out, class In, class F>
CouplingWeights<Out> map_weights(const CouplingWeights<In>& in, F&& f) {
  return {f(in.s_w1), f(in.s_b1), f(in.s_w2), f(in.s_b2),
          f(in.t_w1), f(in.t_b1), f(in.t_w2), f(in.t_b2)};
}

/// Coordinates copied unchanged (and fed to the conditioners) vs the ones
/// transformed affinely.
struct CouplingMask {
  std::vector<std::size_t> pass;
  std::vector<std::size_t> transform;
};

/// Layer 0 passes the even coordinates, layer 1 the odd ones, and so on.
CouplingMask alternating_mask(std::size_t dim, std::size_t layer_index);

struct CouplingLayer {
  CouplingMask mask;
  CouplingWeights<DenseMatrix> weights;
};

struct FlowStack {
  std::vector<CouplingLayer> layers;
  std::size_t dim = 0;
  std::size_t cond_dim = 0;  // width of the conditioning state h
  std::size_t width = 0;     // conditioner hidden width
  double scale_cap = 2.0;

  std::size_t size() const noexcept { return layers.size(); }
};

/// Conditioner output layers start at zero so the stack is the identity map.
FlowStack init_flow(std::size_t dim, std::size_t cond_dim, std::size_t layers, std::size_t width,
                    double scale_cap, Rng& rng);
void validate_flow(const FlowStack& flow);

template <class M>
struct AffineParams {
  M log_scale;  // B x |transform|
  M shift;      // B x |transform|
};

template <class M>
AffineParams<M> condition(const M& x_pass, const M& h, const CouplingWeights<M>& w, double cap) {
  const M in = hcat(x_pass, h);
  const M s_hidden = tanh(add_row(matmul(in, w.s_w1), w.s_b1));
  const M t_hidden = tanh(add_row(matmul(in, w.t_w1), w.t_b1));
  return {scale(tanh(add_row(matmul(s_hidden, w.s_w2), w.s_b2)), cap),
          add_row(matmul(t_hidden, w.t_w2), w.t_b2)};
}

/// x -> (x_pass, x_tr * exp(s) + t); the log-det is the row sum of s.
template <class M>
std::pair<M, M> coupling_forward(const M& x, const M& h, const CouplingMask& mask,
                                 const CouplingWeights<M>& w, double cap) {
  const M x_pass = gather_cols(x, mask.pass);
  const M x_tr = gather_cols(x, mask.transform);
  const AffineParams<M> a = condition(x_pass, h, w, cap);
  const M y_tr = add(hadamard(x_tr, exp(a.log_scale)), a.shift);
  return {scatter_cols(x_pass, mask.pass, y_tr, mask.transform, value_of(x).cols()),
          row_sum(a.log_scale)};
}

template <class M>
M coupling_inverse(const M& y, const M& h, const CouplingMask& mask,
                   const CouplingWeights<M>& w, double cap) {
  const M y_pass = gather_cols(y, mask.pass);
  const M y_tr = gather_cols(y, mask.transform);
  const AffineParams<M> a = condition(y_pass, h, w, cap);
  const M x_tr = hadamard(sub(y_tr, a.shift), exp(scale(a.log_scale, -1.0)));
  return scatter_cols(y_pass, mask.pass, x_tr, mask.transform, value_of(y).cols());
}

/// Per-row log N(f(x); 0, I) + log|det df/dx|. `weights[k]` yields the
/// CouplingWeights<M> of layer k.
template <class M, class Weights>
M flow_log_prob(const M& x, const M& h, const FlowStack& flow, const Weights& weights) {
  M z = x;
  M logdet = lift_constant(x, DenseMatrix(value_of(x).rows(), 1));
  for (std::size_t k = 0; k < flow.size(); ++k) {
    auto [next, ld] = coupling_forward(z, h, flow.layers[k].mask, weights[k], flow.scale_cap);
    z = next;
    logdet = add(logdet, ld);
  }
  const double log_norm =
      -0.5 * static_cast<double>(flow.dim) * std::log(2.0 * std::numbers::pi);
  return add(shift(scale(row_sum(square(z)), -0.5), log_norm), logdet);
}

struct StackWeights {
  const FlowStack& flow;
  const CouplingWeights<DenseMatrix>& operator[](std::size_t k) const {
    return flow.layers[k].weights;
  }
};

struct FlowResult {
  DenseMatrix value;   // B x d
  DenseMatrix logdet;  // B x 1
};

// Checked entry points on plain matrices. x, z are B x d and h is B x H.
FlowResult layer_forward(const DenseMatrix& x, const DenseMatrix& h, const CouplingLayer& layer,
                         double scale_cap);
DenseMatrix layer_inverse(const DenseMatrix& y, const DenseMatrix& h, const CouplingLayer& layer,
                          double scale_cap);
FlowResult forward(const DenseMatrix& x, const DenseMatrix& h, const FlowStack& flow);
DenseMatrix inverse(const DenseMatrix& z, const DenseMatrix& h, const FlowStack& flow);
DenseMatrix log_prob(const DenseMatrix& x, const DenseMatrix& h, const FlowStack& flow);

}  // namespace grusnf

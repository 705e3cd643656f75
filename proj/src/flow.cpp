// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "flow.hpp"

#include <string>

#include "errors.hpp"

namespace grusnf {
namespace {

DenseMatrix uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

void check_inputs(const DenseMatrix& x, const DenseMatrix& h, const FlowStack& flow,
                  const char* op) {
  if (x.cols() != flow.dim || h.cols() != flow.cond_dim || x.rows() != h.rows()) {
    throw ShapeError(std::string(op) + ": input " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", state " + std::to_string(h.rows()) + "x" +
                     std::to_string(h.cols()) + ", flow dim " + std::to_string(flow.dim));
  }
  if (!x.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

void check_conditioner(const AffineParams<DenseMatrix>& a) {
  if (!a.log_scale.all_finite() || !a.shift.all_finite()) {
    throw NumericError("coupling conditioner produced non-finite scale or shift");
  }
}

}  // namespace

CouplingMask alternating_mask(std::size_t dim, std::size_t layer_index) {
  if (dim < 2) throw ContractError("coupling layers need at least 2 coordinates");
  CouplingMask mask;
  for (std::size_t i = 0; i < dim; ++i) {
    ((i % 2 == layer_index % 2) ? mask.pass : mask.transform).push_back(i);
  }
  return mask;
}

FlowStack init_flow(std::size_t dim, std::size_t cond_dim, std::size_t layers, std::size_t width,
                    double scale_cap, Rng& rng) {
  if (layers < 2) throw ContractError("flow needs at least 2 coupling layers");
  FlowStack flow;
  flow.dim = dim;
  flow.cond_dim = cond_dim;
  flow.width = width;
  flow.scale_cap = scale_cap;
  for (std::size_t k = 0; k < layers; ++k) {
    CouplingLayer layer;
    layer.mask = alternating_mask(dim, k);
    const std::size_t fan_in = layer.mask.pass.size() + cond_dim;
    const std::size_t out = layer.mask.transform.size();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    auto& w = layer.weights;
    w.s_w1 = uniform(fan_in, width, bound, rng);
    w.s_b1 = uniform(1, width, bound, rng);
    w.s_w2 = DenseMatrix(width, out);
    w.s_b2 = DenseMatrix(1, out);
    w.t_w1 = uniform(fan_in, width, bound, rng);
    w.t_b1 = uniform(1, width, bound, rng);
    w.t_w2 = DenseMatrix(width, out);
    w.t_b2 = DenseMatrix(1, out);
    flow.layers.push_back(std::move(layer));
  }
  return flow;
}

void validate_flow(const FlowStack& flow) {
  if (flow.size() < 2) throw ShapeError("flow has fewer than 2 layers");
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const CouplingLayer& layer = flow.layers[k];
    const CouplingMask expected = alternating_mask(flow.dim, k);
    if (layer.mask.pass != expected.pass || layer.mask.transform != expected.transform) {
      throw ShapeError("flow layer " + std::to_string(k) + " has an unexpected mask");
    }
    const std::size_t fan_in = layer.mask.pass.size() + flow.cond_dim;
    const std::size_t out = layer.mask.transform.size();
    auto expect = [&](const DenseMatrix& m, std::size_t r, std::size_t c, const char* name) {
      if (m.rows() != r || m.cols() != c) {
        throw ShapeError("flow layer " + std::to_string(k) + " weight " + name + " is " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
      }
    };
    const auto& w = layer.weights;
    expect(w.s_w1, fan_in, flow.width, "s_w1");
    expect(w.s_b1, 1, flow.width, "s_b1");
    expect(w.s_w2, flow.width, out, "s_w2");
    expect(w.s_b2, 1, out, "s_b2");
    expect(w.t_w1, fan_in, flow.width, "t_w1");
    expect(w.t_b1, 1, flow.width, "t_b1");
    expect(w.t_w2, flow.width, out, "t_w2");
    expect(w.t_b2, 1, out, "t_b2");
  }
}

FlowResult layer_forward(const DenseMatrix& x, const DenseMatrix& h, const CouplingLayer& layer,
                         double scale_cap) {
  if (!x.all_finite()) throw NumericError("layer_forward: non-finite input");
  const DenseMatrix x_pass = gather_cols(x, layer.mask.pass);
  check_conditioner(condition(x_pass, h, layer.weights, scale_cap));
  auto [y, logdet] = coupling_forward(x, h, layer.mask, layer.weights, scale_cap);
  return {std::move(y), std::move(logdet)};
}

DenseMatrix layer_inverse(const DenseMatrix& y, const DenseMatrix& h, const CouplingLayer& layer,
                          double scale_cap) {
  if (!y.all_finite()) throw NumericError("layer_inverse: non-finite input");
  DenseMatrix x = coupling_inverse(y, h, layer.mask, layer.weights, scale_cap);
  if (!x.all_finite()) throw NumericError("layer_inverse: non-finite output");
  return x;
}

FlowResult forward(const DenseMatrix& x, const DenseMatrix& h, const FlowStack& flow) {
  check_inputs(x, h, flow, "flow forward");
  FlowResult r{x, DenseMatrix(x.rows(), 1)};
  for (const CouplingLayer& layer : flow.layers) {
    FlowResult step = layer_forward(r.value, h, layer, flow.scale_cap);
    r.value = std::move(step.value);
    r.logdet = add(r.logdet, step.logdet);
  }
  if (!r.value.all_finite()) throw NumericError("flow forward: non-finite latent");
  return r;
}

DenseMatrix inverse(const DenseMatrix& z, const DenseMatrix& h, const FlowStack& flow) {
  check_inputs(z, h, flow, "flow inverse");
  DenseMatrix x = z;
  for (std::size_t k = flow.size(); k-- > 0;) {
    x = layer_inverse(x, h, flow.layers[k], flow.scale_cap);
  }
  return x;
}

DenseMatrix log_prob(const DenseMatrix& x, const DenseMatrix& h, const FlowStack& flow) {
  check_inputs(x, h, flow, "log_prob");
  DenseMatrix lp = flow_log_prob(x, h, flow, StackWeights{flow});
  if (!lp.all_finite()) throw NumericError("log_prob: non-finite value");
  return lp;
}

}  // namespace grusnf

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "tape.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "errors.hpp"

namespace grusnf {

const DenseMatrix& Var::value() const { return tape->value(*this); }

Var GradTape::constant(DenseMatrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var GradTape::parameter(DenseMatrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  params_.push_back(nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var GradTape::record(DenseMatrix value, std::vector<std::size_t> inputs, Pullback pullback) {
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [this](std::size_t i) { return nodes_[i].needs_grad; });
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs),
                        any ? std::move(pullback) : nullptr, any});
  return Var{this, nodes_.size() - 1};
}

void GradTape::accumulate(std::size_t id, const DenseMatrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::vector<DenseMatrix> GradTape::backward(Var output, double seed) {
  if (output.tape != this) throw ContractError("backward: variable belongs to another tape");
  const DenseMatrix& out = nodes_[output.id].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw ContractError("backward: output must be scalar, got " + std::to_string(out.rows()) +
                        "x" + std::to_string(out.cols()));
  }
  for (Node& n : nodes_) n.grad = DenseMatrix();
  if (nodes_[output.id].needs_grad) nodes_[output.id].grad = DenseMatrix(1, 1, seed);
  for (std::size_t id = output.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.pullback && !n.grad.empty()) n.pullback(*this, id);
  }
  std::vector<DenseMatrix> grads;
  grads.reserve(params_.size());
  for (std::size_t p : params_) {
    const Node& n = nodes_[p];
    grads.push_back(n.grad.empty() ? DenseMatrix(n.value.rows(), n.value.cols()) : n.grad);
  }
  return grads;
}

namespace {

GradTape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
  return *a.tape;
}

template <class F>
Var unary(Var a, DenseMatrix value, F local_grad) {
  // local_grad(x, y) returns dy/dx elementwise
  return a.tape->record(std::move(value), {a.id}, [local_grad](GradTape& t, std::size_t self) {
    const std::size_t in = t.input(self, 0);
    if (!t.needs_grad(in)) return;
    const DenseMatrix& g = t.grad(self);
    const DenseMatrix& x = t.value(Var{&t, in});
    const DenseMatrix& y = t.value(Var{&t, self});
    DenseMatrix dx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * local_grad(x[i], y[i]);
    t.accumulate(in, dx);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  GradTape& t = same_tape(a, b);
  return t.record(matmul(a.value(), b.value()), {a.id, b.id}, [](GradTape& t, std::size_t self) {
    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
    const DenseMatrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.accumulate(ia, matmul_nt(g, t.value(Var{&t, ib})));
    if (t.needs_grad(ib)) t.accumulate(ib, matmul_tn(t.value(Var{&t, ia}), g));
  });
}

Var add(Var a, Var b) {
  GradTape& t = same_tape(a, b);
  return t.record(add(a.value(), b.value()), {a.id, b.id}, [](GradTape& t, std::size_t self) {
    t.accumulate(t.input(self, 0), t.grad(self));
    t.accumulate(t.input(self, 1), t.grad(self));
  });
}

Var sub(Var a, Var b) {
  GradTape& t = same_tape(a, b);
  return t.record(sub(a.value(), b.value()), {a.id, b.id}, [](GradTape& t, std::size_t self) {
    t.accumulate(t.input(self, 0), t.grad(self));
    if (t.needs_grad(t.input(self, 1))) t.accumulate(t.input(self, 1), scale(t.grad(self), -1.0));
  });
}

Var hadamard(Var a, Var b) {
  GradTape& t = same_tape(a, b);
  return t.record(hadamard(a.value(), b.value()), {a.id, b.id},
                  [](GradTape& t, std::size_t self) {
                    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
                    const DenseMatrix& g = t.grad(self);
                    if (t.needs_grad(ia)) t.accumulate(ia, hadamard(g, t.value(Var{&t, ib})));
                    if (t.needs_grad(ib)) t.accumulate(ib, hadamard(g, t.value(Var{&t, ia})));
                  });
}

Var add_row(Var a, Var bias) {
  GradTape& t = same_tape(a, bias);
  return t.record(add_row(a.value(), bias.value()), {a.id, bias.id},
                  [](GradTape& t, std::size_t self) {
                    const DenseMatrix& g = t.grad(self);
                    t.accumulate(t.input(self, 0), g);
                    const std::size_t ib = t.input(self, 1);
                    if (!t.needs_grad(ib)) return;
                    DenseMatrix db(1, g.cols());
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t c = 0; c < g.cols(); ++c) db[c] += g(r, c);
                    }
                    t.accumulate(ib, db);
                  });
}

Var scale(Var a, double s) {
  return unary(a, scale(a.value(), s), [s](double, double) { return s; });
}

Var shift(Var a, double s) {
  return unary(a, shift(a.value(), s), [](double, double) { return 1.0; });
}

Var sigmoid(Var a) {
  return unary(a, sigmoid(a.value()), [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, tanh(a.value()), [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, exp(a.value()), [](double, double y) { return y; });
}

// Subgradient 0 at the kink.
Var abs(Var a) {
  return unary(a, abs(a.value()), [](double x, double) {
    return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  });
}

Var square(Var a) {
  return unary(a, square(a.value()), [](double x, double) { return 2.0 * x; });
}

Var gather_cols(Var a, std::span<const std::size_t> cols) {
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  const std::size_t width = a.cols();
  return a.tape->record(gather_cols(a.value(), cols), {a.id},
                        [idx = std::move(idx), width](GradTape& t, std::size_t self) {
                          const DenseMatrix& g = t.grad(self);
                          DenseMatrix dx(g.rows(), width);
                          for (std::size_t r = 0; r < g.rows(); ++r) {
                            for (std::size_t j = 0; j < idx.size(); ++j) dx(r, idx[j]) += g(r, j);
                          }
                          t.accumulate(t.input(self, 0), dx);
                        });
}

Var scatter_cols(Var a, std::span<const std::size_t> a_cols, Var b,
                 std::span<const std::size_t> b_cols, std::size_t total_cols) {
  GradTape& t = same_tape(a, b);
  std::vector<std::size_t> ia(a_cols.begin(), a_cols.end());
  std::vector<std::size_t> ib(b_cols.begin(), b_cols.end());
  return t.record(scatter_cols(a.value(), a_cols, b.value(), b_cols, total_cols), {a.id, b.id},
                  [ia = std::move(ia), ib = std::move(ib)](GradTape& t, std::size_t self) {
                    const DenseMatrix& g = t.grad(self);
                    if (t.needs_grad(t.input(self, 0))) t.accumulate(t.input(self, 0), gather_cols(g, ia));
                    if (t.needs_grad(t.input(self, 1))) t.accumulate(t.input(self, 1), gather_cols(g, ib));
                  });
}

Var hcat(Var a, Var b) {
  GradTape& t = same_tape(a, b);
  const std::size_t left = a.cols(), right = b.cols();
  return t.record(hcat(a.value(), b.value()), {a.id, b.id},
                  [left, right](GradTape& t, std::size_t self) {
                    const DenseMatrix& g = t.grad(self);
                    const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
                    if (t.needs_grad(ia)) {
                      DenseMatrix da(g.rows(), left);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < left; ++c) da(r, c) = g(r, c);
                      t.accumulate(ia, da);
                    }
                    if (t.needs_grad(ib)) {
                      DenseMatrix db(g.rows(), right);
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < right; ++c) db(r, c) = g(r, left + c);
                      t.accumulate(ib, db);
                    }
                  });
}

Var row_sum(Var a) {
  const std::size_t width = a.cols();
  return a.tape->record(row_sum(a.value()), {a.id}, [width](GradTape& t, std::size_t self) {
    const DenseMatrix& g = t.grad(self);
    DenseMatrix dx(g.rows(), width);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) dx(r, c) = g[r];
    t.accumulate(t.input(self, 0), dx);
  });
}

Var sum(Var a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  return a.tape->record(sum(a.value()), {a.id}, [rows, cols](GradTape& t, std::size_t self) {
    t.accumulate(t.input(self, 0), DenseMatrix(rows, cols, t.grad(self)[0]));
  });
}

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<DenseMatrix>& params,
                           double tol, double step) {
  auto evaluate = [&](const std::vector<DenseMatrix>& values, std::size_t flat) {
    GradTape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const auto& v : values) vars.push_back(tape.parameter(v));
    const Var out = fn(tape, vars);
    const DenseMatrix& o = out.value();
    if (o.size() != 1) throw ContractError("grad_check: function output must be scalar");
    if (!std::isfinite(o[0])) {
      throw NumericError("grad_check: non-finite evaluation at parameter entry " +
                             std::to_string(flat),
                         flat);
    }
    return o[0];
  };

  std::vector<DenseMatrix> analytic;
  {
    GradTape tape;
    std::vector<Var> vars;
    for (const auto& v : params) vars.push_back(tape.parameter(v));
    const Var out = fn(tape, vars);
    if (!std::isfinite(out.value()[0])) {
      throw NumericError("grad_check: non-finite evaluation at base point");
    }
    analytic = tape.backward(out);
  }

  GradCheckReport report;
  report.max_rel_error_per_param.assign(params.size(), 0.0);
  std::vector<DenseMatrix> probe = params;
  std::size_t flat = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i, ++flat) {
      const double x0 = params[p][i];
      probe[p][i] = x0 + step;
      const double f_plus = evaluate(probe, flat);
      probe[p][i] = x0 - step;
      const double f_minus = evaluate(probe, flat);
      probe[p][i] = x0;
      const double f0 = evaluate(probe, flat);

      GradCheckReport::Entry e;
      e.param = p;
      e.index = i;
      e.analytic = analytic[p][i];
      e.numeric = (f_plus - f_minus) / (2.0 * step);
      const double denom = std::max({std::fabs(e.analytic), std::fabs(e.numeric), 1e-8});
      e.rel_error = std::fabs(e.analytic - e.numeric) / denom;
      const double fwd = (f_plus - f0) / step;
      const double bwd = (f0 - f_minus) / step;
      e.non_smooth =
          std::fabs(fwd - bwd) > std::max(1e-2, 0.1 * std::max(std::fabs(fwd), std::fabs(bwd)));
      if (e.non_smooth) ++report.non_smooth_count;
      report.max_rel_error_per_param[p] = std::max(report.max_rel_error_per_param[p], e.rel_error);
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      if (e.rel_error >= tol || e.non_smooth) report.passed = false;
      report.entries.push_back(e);
    }
  }
  return report;
}

}  // namespace grusnf

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace grusnf {

class GradTape;

/// Handle to a node recorded on a GradTape.
struct Var {
  GradTape* tape = nullptr;
  std::size_t id = 0;

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode tape over matrix-valued nodes. Nodes are appended in
/// evaluation order, so the reverse of the recording order is a valid reverse
/// topological order. Single writer; not shareable during a pass.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var constant(DenseMatrix value);
  /// Tracked leaf. Gradients are returned by backward() in the order the
  /// parameters were registered.
  Var parameter(DenseMatrix value);

  const DenseMatrix& value(Var v) const { return nodes_[v.id].value; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  /// Seeds d(output) = `seed` and propagates to every tracked parameter.
  /// `output` must be 1x1.
  std::vector<DenseMatrix> backward(Var output, double seed = 1.0);

  // Used by the operation implementations in tape.cpp.
  using Pullback = std::function<void(GradTape&, std::size_t self)>;
  Var record(DenseMatrix value, std::vector<std::size_t> inputs, Pullback pullback);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const DenseMatrix& grad(std::size_t id) const { return nodes_[id].grad; }
  void accumulate(std::size_t id, const DenseMatrix& g);
  std::size_t input(std::size_t self, std::size_t i) const { return nodes_[self].inputs[i]; }

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    std::vector<std::size_t> inputs;
    Pullback pullback;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> params_;
};

// Taped counterparts of the plain kernels in matrix.hpp. Same names so model
// code can be written once as a template over DenseMatrix or Var.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var add_row(Var a, Var bias);
Var scale(Var a, double s);
Var shift(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var abs(Var a);
Var square(Var a);
Var gather_cols(Var a, std::span<const std::size_t> cols);
Var scatter_cols(Var a, std::span<const std::size_t> a_cols, Var b,
                 std::span<const std::size_t> b_cols, std::size_t total_cols);
Var hcat(Var a, Var b);
Var row_sum(Var a);
Var sum(Var a);

// Lets templates create constants without knowing the backend.
inline DenseMatrix lift_constant(const DenseMatrix& like, DenseMatrix value) {
  (void)like;
  return value;
}
inline Var lift_constant(Var like, DenseMatrix value) {
  return like.tape->constant(std::move(value));
}
inline const DenseMatrix& value_of(const DenseMatrix& m) { return m; }
inline const DenseMatrix& value_of(Var v) { return v.value(); }

/// Result of comparing reverse-mode gradients against central differences.
struct GradCheckReport {
  struct Entry {
    std::size_t param = 0;  // which parameter matrix
    std::size_t index = 0;  // flat index inside it
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool non_smooth = false;
  };
  std::vector<Entry> entries;
  std::vector<double> max_rel_error_per_param;
  double max_rel_error = 0.0;
  std::size_t non_smooth_count = 0;
  bool passed = true;
};

/// Builds a scalar (1x1) output on the given tape from tracked parameters.
using ScalarFn = std::function<Var(GradTape&, std::span<const Var>)>;

/// Central differences with step 1e-5; relative error uses the denominator
/// max(|a|, |b|, 1e-8). Entries whose one-sided differences jump (a kink) are
/// flagged non-smooth and fail the check. Throws NumericError carrying the
/// flat parameter-entry index if an evaluation is non-finite.
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<DenseMatrix>& params,
                           double tol, double step = 1e-5);

}  // namespace grusnf

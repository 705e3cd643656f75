// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "flow.hpp"
#include "tape.hpp"
#include "test_util.hpp"

using namespace grusnf;
using grusnf::testing::max_abs_diff;
using grusnf::testing::random_matrix;

namespace {

// init_flow zeroes the output layers; tests need non-trivial maps.
FlowStack random_flow(std::size_t d, std::size_t cond, std::size_t n, std::uint64_t seed,
                      double spread = 0.5) {
  Rng rng(seed);
  FlowStack f = init_flow(d, cond, n, 16, 2.0, rng);
  std::mt19937_64 fill(seed ^ 0xabcdef);
  for (auto& layer : f.layers) {
    for_each_weight(layer.weights, [&](const char*, DenseMatrix& m) {
      m = random_matrix(fill, m.rows(), m.cols(), -spread, spread);
    });
  }
  return f;
}

// log|det J| via Gaussian elimination with partial pivoting.
double log_abs_det(DenseMatrix a) {
  const std::size_t n = a.rows();
  double acc = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    }
    for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
    acc += std::log(std::abs(a(c, c)));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
    }
  }
  return acc;
}

template <class Map>
DenseMatrix fd_jacobian(const DenseMatrix& x, Map&& f, double step = 1e-6) {
  const std::size_t d = x.cols();
  DenseMatrix j(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    DenseMatrix xp = x, xm = x;
    xp(0, c) += step;
    xm(0, c) -= step;
    const DenseMatrix yp = f(xp), ym = f(xm);
    for (std::size_t r = 0; r < d; ++r) j(r, c) = (yp(0, r) - ym(0, r)) / (2 * step);
  }
  return j;
}

}  // namespace

TEST_CASE("masks alternate and cover every coordinate") {
  const CouplingMask m0 = alternating_mask(5, 0), m1 = alternating_mask(5, 1);
  CHECK(m0.pass == std::vector<std::size_t>{0, 2, 4});
  CHECK(m0.transform == std::vector<std::size_t>{1, 3});
  CHECK(m1.pass == m0.transform);
  CHECK(m1.transform == m0.pass);
  CHECK(alternating_mask(5, 2).pass == m0.pass);
  CHECK_THROWS_AS(alternating_mask(1, 0), ContractError);
  Rng rng(1);
  CHECK_THROWS_AS(init_flow(4, 3, 1, 8, 2.0, rng), ContractError);
}

TEST_CASE("fresh flow is the identity") {
  Rng rng(2);
  const FlowStack f = init_flow(6, 5, 4, 16, 2.0, rng);
  std::mt19937_64 g(3);
  const DenseMatrix x = random_matrix(g, 4, 6), h = random_matrix(g, 4, 5);
  const FlowResult r = forward(x, h, f);
  CHECK(r.value == x);
  CHECK(r.logdet == DenseMatrix(4, 1));
  CHECK(inverse(x, h, f) == x);
}

TEST_CASE("hand-set layer doubles one coordinate") {
  Rng rng(4);
  FlowStack f = init_flow(2, 1, 2, 4, 2.0, rng);
  CouplingLayer& layer = f.layers[0];  // passes coordinate 0, transforms 1
  layer.weights.s_b2 = DenseMatrix{{std::atanh(std::numbers::ln2 / 2.0)}};
  const DenseMatrix h{{0.3}};
  const FlowResult r = layer_forward(DenseMatrix{{1.5, -0.75}}, h, layer, 2.0);
  CHECK(r.value(0, 0) == 1.5);
  CHECK(r.value(0, 1) == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK(r.logdet(0, 0) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  const DenseMatrix back = layer_inverse(DenseMatrix{{1.5, -1.5}}, h, layer, 2.0);
  CHECK(back(0, 1) == doctest::Approx(-0.75).epsilon(1e-14));
}

TEST_CASE("roundtrip over 1000 seeded points") {
  const FlowStack f = random_flow(10, 8, 4, 5);
  std::mt19937_64 g(6);
  const DenseMatrix x = random_matrix(g, 1000, 10, -3, 3), h = random_matrix(g, 1000, 8);
  const FlowResult r = forward(x, h, f);
  CHECK(max_abs_diff(inverse(r.value, h, f), x) < 1e-9);
  // The other direction: z ~ N(0, I) through inverse then forward.
  std::normal_distribution<double> n01;
  DenseMatrix z(1000, 10);
  for (auto& v : z.values()) v = n01(g);
  CHECK(max_abs_diff(forward(inverse(z, h, f), h, f).value, z) < 1e-9);
}

TEST_CASE("stack logdet is the sum of layer logdets") {
  const FlowStack f = random_flow(10, 4, 4, 7);
  std::mt19937_64 g(8);
  const DenseMatrix x = random_matrix(g, 3, 10), h = random_matrix(g, 3, 4);
  DenseMatrix cur = x, total(3, 1);
  for (const auto& layer : f.layers) {
    const FlowResult r = layer_forward(cur, h, layer, f.scale_cap);
    cur = r.value;
    total = add(total, r.logdet);
  }
  const FlowResult all = forward(x, h, f);
  CHECK(all.value == cur);
  CHECK(all.logdet == total);
}

TEST_CASE("logdet matches the finite-difference Jacobian") {
  for (std::size_t d = 2; d <= 8; ++d) {
    CAPTURE(d);
    const FlowStack f = random_flow(d, 3, 4, 100 + d);
    std::mt19937_64 g(d);
    for (int trial = 0; trial < 5; ++trial) {
      const DenseMatrix x = random_matrix(g, 1, d, -2, 2), h = random_matrix(g, 1, 3);
      const DenseMatrix j = fd_jacobian(x, [&](const DenseMatrix& p) { return forward(p, h, f).value; });
      const double fd = log_abs_det(j);
      const double analytic = forward(x, h, f).logdet(0, 0);
      CHECK(std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-8) < 1e-5);
      // Single layer too.
      const FlowResult l = layer_forward(x, h, f.layers[1], f.scale_cap);
      const DenseMatrix jl = fd_jacobian(
          x, [&](const DenseMatrix& p) { return layer_forward(p, h, f.layers[1], f.scale_cap).value; });
      CHECK(std::abs(log_abs_det(jl) - l.logdet(0, 0)) / std::max(std::abs(l.logdet(0, 0)), 1e-8) <
            1e-5);
    }
  }
}

TEST_CASE("log_prob of the identity stack") {
  Rng rng(9);
  const FlowStack f = init_flow(2, 2, 2, 4, 2.0, rng);
  const DenseMatrix h(1, 2);
  CHECK(log_prob(DenseMatrix{{0, 0}}, h, f)(0, 0) ==
        doctest::Approx(-std::log(2 * std::numbers::pi)).epsilon(1e-15));
  double prev = log_prob(DenseMatrix{{0, 0}}, h, f)(0, 0);
  for (double r = 0.25; r < 5; r += 0.25) {
    const double lp = log_prob(DenseMatrix{{r * 0.6, r * 0.8}}, h, f)(0, 0);
    CHECK(lp < prev);
    prev = lp;
  }
}

TEST_CASE("density of a random stack integrates to one") {
  const FlowStack f = random_flow(2, 3, 4, 10, 0.4);
  const DenseMatrix h1{{0.2, -0.4, 0.7}};
  const int n = 801;
  const double lo = -10.0, hi = 10.0, step = (hi - lo) / (n - 1);
  DenseMatrix grid(n * n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      grid(i * n + j, 0) = lo + i * step;
      grid(i * n + j, 1) = lo + j * step;
    }
  }
  const DenseMatrix lp = log_prob(grid, repeat_row(h1, grid.rows()), f);
  double mass = 0.0;
  for (double v : lp.values()) mass += std::exp(v);
  mass *= step * step;
  CHECK(std::abs(mass - 1.0) < 0.02);
}

TEST_CASE("log_prob gradients pass grad_check") {
  const FlowStack f = random_flow(4, 3, 2, 11);
  std::mt19937_64 g(12);
  const DenseMatrix x = random_matrix(g, 2, 4), h = random_matrix(g, 2, 3);
  std::vector<DenseMatrix> params;
  for (auto layer : f.layers) {
    for_each_weight(layer.weights, [&](const char*, DenseMatrix& m) { params.push_back(m); });
  }
  ScalarFn fn = [&](GradTape& t, std::span<const Var> p) {
    std::vector<CouplingWeights<Var>> w(f.size());
    std::size_t i = 0;
    for (auto& lw : w) for_each_weight(lw, [&](const char*, Var& m) { m = p[i++]; });
    return sum(flow_log_prob(t.constant(x), t.constant(h), f, w));
  };
  const auto r = grad_check(fn, params, 1e-4);
  CHECK(r.passed);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("non-finite input is rejected") {
  const FlowStack f = random_flow(4, 3, 2, 13);
  CHECK_THROWS_AS(forward(DenseMatrix{{0, std::nan(""), 0, 0}}, DenseMatrix(1, 3), f), NumericError);
  CHECK_THROWS_AS(inverse(DenseMatrix(1, 5), DenseMatrix(1, 3), f), ShapeError);
}

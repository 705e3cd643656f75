// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "errors.hpp"
#include "sampler.hpp"
#include "test_util.hpp"

using namespace grusnf;
using grusnf::testing::max_abs_diff;
using grusnf::testing::random_matrix;

namespace {

GruNfModel random_model(std::uint64_t seed, std::size_t d = 4) {
  ModelDims dims;
  dims.dim = d;
  dims.hidden = 6;
  dims.layers = 4;
  dims.width = 8;
  GruNfModel m = init_model(dims, seed);
  std::mt19937_64 rng(seed + 1);
  for (auto* p : parameters(m)) *p = random_matrix(rng, p->rows(), p->cols(), -0.3, 0.3);
  return m;
}

EnergyContext context(double lambda, std::span<const double> anchor) {
  EnergyContext ctx;
  ctx.lambda = lambda;
  ctx.anchor = anchor;
  ctx.layer = 1;
  ctx.layers = 1;
  return ctx;
}

}  // namespace

TEST_CASE("energies by hand") {
  const std::vector<double> y{3, 4}, zero{0, 0};
  CHECK(prior_energy(zero) == 0.0);
  CHECK(prior_energy(y) == 12.5);
  CHECK(prior_energy(std::vector<double>{-3, -4}) == 12.5);
  CHECK(target_energy(y, y) == 0.0);
  CHECK(target_energy(y, zero) == 5.0);
  CHECK(target_energy(y, zero, TargetEnergy::kL2Squared) == 25.0);
  CHECK(target_energy(std::vector<double>{4.5, 5.5}, std::vector<double>{1.5, 1.5}) == 5.0);
  CHECK_THROWS_AS(target_energy(y, std::vector<double>{0, 0, 0}), ShapeError);

  CHECK(potential(y, context(0.5, zero)) == 8.75);
  CHECK(potential(y, context(1.0, zero)) == target_energy(y, zero));
  CHECK(potential(y, context(0.0, zero)) == prior_energy(y));
  CHECK(potential(y, context(0.25, y)) == doctest::Approx(0.75 * 12.5).epsilon(1e-15));
}

TEST_CASE("acceptance probability") {
  CHECK(acceptance_probability(1.0, 1.0) == 1.0);
  CHECK(acceptance_probability(1.0, 0.2) == 1.0);
  CHECK(acceptance_probability(1.0, 1.0 + std::numbers::ln2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("empirical acceptance follows exp(-du)") {
  Rng rng(1);
  for (double du : {0.1, std::numbers::ln2, 1.5, 3.0}) {
    const int n = 200000;
    int acc = 0;
    for (int i = 0; i < n; ++i) acc += metropolis_accept(0.0, du, rng) ? 1 : 0;
    CHECK(std::abs(static_cast<double>(acc) / n - std::exp(-du)) < 0.02 * std::exp(-du) + 3e-3);
  }
}

TEST_CASE("chain targeting the standard Gaussian is calibrated") {
  const std::vector<double> anchor(3, 0.0);
  const EnergyContext ctx = context(0.0, anchor);
  Rng rng(2);
  std::vector<double> y(3, 0.0);
  const std::size_t steps = 50000;
  std::vector<std::vector<double>> trace(3);
  for (std::size_t i = 0; i < steps; ++i) {
    mh_step(y, ctx, 0.5, rng);
    for (std::size_t c = 0; c < 3; ++c) trace[c].push_back(y[c]);
  }
  for (const auto& xs : trace) {
    // Standard errors inflated by the integrated autocorrelation time (batch means).
    const std::size_t batches = 50, len = steps / batches;
    std::vector<double> means, vars;
    for (std::size_t b = 0; b < batches; ++b) {
      double m = 0.0, v = 0.0;
      for (std::size_t i = 0; i < len; ++i) m += xs[b * len + i];
      m /= len;
      for (std::size_t i = 0; i < len; ++i) v += xs[b * len + i] * xs[b * len + i];
      means.push_back(m);
      vars.push_back(v / len);
    }
    auto mean_se = [&](const std::vector<double>& v) {
      double m = 0.0, s = 0.0;
      for (double x : v) m += x;
      m /= v.size();
      for (double x : v) s += (x - m) * (x - m);
      return std::pair{m, std::sqrt(s / (v.size() - 1) / v.size())};
    };
    const auto [m, se_m] = mean_se(means);
    const auto [second, se_v] = mean_se(vars);
    CHECK(std::abs(m) < 3 * se_m);
    CHECK(std::abs(second - m * m - 1.0) < 3 * se_v);
  }
}

TEST_CASE("mh_step keeps the state finite and consumes a fixed number of draws") {
  const std::vector<double> anchor{0.5, -0.5};
  const EnergyContext ctx = context(0.7, anchor);
  Rng a(3), b(3);
  std::vector<double> y{10.0, -10.0};
  for (int i = 0; i < 1000; ++i) {
    mh_step(y, ctx, 0.3, a);
    for (double v : y) CHECK(std::isfinite(v));
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u;
    n(b);
    n(b);
    u(b);
  }
  CHECK(a() == b());
}

TEST_CASE("lambda schedule") {
  CHECK(lambda_for(1, 4, LambdaOrder::kTraversal) == 0.25);
  CHECK(lambda_for(4, 4, LambdaOrder::kTraversal) == 1.0);
  CHECK(lambda_for(1, 4, LambdaOrder::kForwardIndex) == 1.0);
  CHECK(lambda_for(4, 4, LambdaOrder::kForwardIndex) == 0.25);

  const GruNfModel m = random_model(4);
  SamplerConfig cfg;
  Rng rng(5);
  const auto [y, diag] = refine_sample(DenseMatrix(1, 4, 0.3), DenseMatrix(1, 6), m, cfg, rng);
  CHECK(diag.lambdas() == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(diag.proposals() == 8);
  CHECK(diag.accepts() <= diag.proposals());
}

TEST_CASE("zero steps reproduce the plain flow inverse") {
  const GruNfModel m = random_model(6);
  std::mt19937_64 g(7);
  const DenseMatrix z = random_matrix(g, 1, 4), h = random_matrix(g, 1, 6);
  SamplerConfig cfg;
  cfg.steps = 0;
  Rng rng(8);
  CHECK(refine_sample(z, h, m, cfg, rng).first == inverse(z, h, m.flow));
}

TEST_CASE("vanishing proposals converge to the plain inverse") {
  const GruNfModel m = random_model(9);
  std::mt19937_64 g(10);
  const DenseMatrix z = random_matrix(g, 1, 4), h = random_matrix(g, 1, 6);
  SamplerConfig cfg;
  cfg.proposal_std = 1e-9;
  Rng rng(11);
  CHECK(max_abs_diff(refine_sample(z, h, m, cfg, rng).first, inverse(z, h, m.flow)) < 1e-6);
}

TEST_CASE("long chains at lambda 1 pull toward the anchor") {
  Rng rng(12);
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix anchor = random_matrix(g, 1, 5);
    EnergyContext ctx = context(1.0, anchor.values());
    double start = 0.0, end = 0.0;
    const int chains = 50;
    for (int c = 0; c < chains; ++c) {
      // exp(-|y - a|) in 5 dims has mean radius 5; start well outside it.
      DenseMatrix y = add(anchor, random_matrix(g, 1, 5, -10, 10));
      start += target_energy(y.values(), anchor.values());
      for (int s = 0; s < 200; ++s) mh_step(y.values(), ctx, 0.3, rng);
      end += target_energy(y.values(), anchor.values());
    }
    CHECK(end < start);
  }
}

TEST_CASE("refined sampling reduces to plain sampling with zero steps") {
  const GruNfModel m = random_model(14);
  std::mt19937_64 g(15);
  const DenseMatrix window = random_matrix(g, 6, 4);
  for (std::size_t horizon : {1, 5, 14}) {
    SamplerConfig cfg;
    cfg.steps = 0;
    cfg.seed = 21;
    const RefinedSamples r = sample_refined(m, window, horizon, 12, cfg, 3);
    const SampleSet p = sample_plain(m, window, horizon, 12, 21, 3);
    CHECK(r.samples.trajectories == p.trajectories);
  }
}

TEST_CASE("refined sampling is deterministic across thread counts") {
  const GruNfModel m = random_model(16);
  std::mt19937_64 g(17);
  const DenseMatrix window = random_matrix(g, 6, 4);
  SamplerConfig cfg;
  cfg.seed = 4;
  const RefinedSamples a = sample_refined(m, window, 7, 15, cfg, 1, 1);
  const RefinedSamples b = sample_refined(m, window, 7, 15, cfg, 1, 3);
  CHECK(a.samples == b.samples);
  CHECK(a.diagnostics.accepts() == b.diagnostics.accepts());
  CHECK(a.diagnostics.layers[0].energy_before == b.diagnostics.layers[0].energy_before);
  CHECK(a.diagnostics.proposals() == 15 * 7 * 4 * 2);
  CHECK_FALSE(a.samples.trajectories == sample_plain(m, window, 7, 15, 4, 1).trajectories);
}

TEST_CASE("anchor modes") {
  const GruNfModel m = random_model(18);
  std::mt19937_64 g(19);
  const DenseMatrix h = random_matrix(g, 3, 6);
  CHECK(compute_anchor(m, h, AnchorMode::kReadout) == predict(h, m.gru));
  CHECK(compute_anchor(m, h, AnchorMode::kFlowAtPriorMean) == inverse(DenseMatrix(3, 4), h, m.flow));
}

TEST_CASE("diagnostics JSON lines") {
  const GruNfModel m = random_model(20);
  SamplerConfig cfg;
  const RefinedSamples r = sample_refined(m, DenseMatrix(3, 4), 2, 4, cfg);
  const std::string text = format_diagnostics_jsonl(r.diagnostics, "t7");
  std::istringstream in(text);
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["window_id"] == "t7");
    CHECK(j["layer"].get<std::size_t>() == count + 1);
    CHECK(j["proposals"].get<std::uint64_t>() == 4 * 2 * 2);
    const double rate = j["acceptance_rate"].get<double>();
    CHECK(rate >= 0.0);
    CHECK(rate <= 1.0);
    ++count;
  }
  CHECK(count == 4);
}

TEST_CASE("config validation") {
  SamplerConfig cfg;
  cfg.proposal_std = 0.0;
  CHECK_THROWS_AS(validate_sampler_config(cfg), ConfigError);
}

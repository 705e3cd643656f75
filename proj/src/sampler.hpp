// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "model.hpp"

namespace grusnf {

enum class AnchorMode { kReadout, kFlowAtPriorMean };
enum class TargetEnergy { kL2, kL2Squared };
/// kTraversal: lambda = k/n where k counts inverse layers already applied.
/// kForwardIndex: lambda = (forward index of the layer + 1)/n.
enum class LambdaOrder { kTraversal, kForwardIndex };

struct SamplerConfig {
  std::size_t steps = 2;  // m, Metropolis-Hastings steps after each flow layer
  double proposal_std = 0.03;
  std::uint64_t seed = 0;
  AnchorMode anchor = AnchorMode::kReadout;
  TargetEnergy target = TargetEnergy::kL2;
  LambdaOrder lambda_order = LambdaOrder::kTraversal;
};

void validate_sampler_config(const SamplerConfig& cfg);

struct EnergyContext {
  double lambda = 0.0;
  std::span<const double> anchor;
  std::size_t layer = 0;  // k, 1-based traversal position
  std::size_t layers = 0; // n
  TargetEnergy target = TargetEnergy::kL2;
};

/// 0.5 * |y|^2
double prior_energy(std::span<const double> y);
/// |anchor - y|, or its square for TargetEnergy::kL2Squared.
double target_energy(std::span<const double> y, std::span<const double> anchor,
                     TargetEnergy kind = TargetEnergy::kL2);
/// (1 - lambda) * prior + lambda * target
double potential(std::span<const double> y, const EnergyContext& ctx);

/// min(1, exp(current - proposed)).
double acceptance_probability(double current_energy, double proposed_energy);
/// Draws one uniform and accepts with the probability above.
bool metropolis_accept(double current_energy, double proposed_energy, Rng& rng);

/// One random-walk Metropolis-Hastings move with an isotropic Gaussian
/// proposal. Updates `y` in place on acceptance and returns whether the
/// proposal was accepted. Always consumes d normals and one uniform.
bool mh_step(std::span<double> y, const EnergyContext& ctx, double proposal_std, Rng& rng);
std::pair<std::vector<double>, bool> mh_step(std::span<const double> y, const EnergyContext& ctx,
                                             const SamplerConfig& cfg, Rng& rng);

struct LayerDiagnostics {
  std::size_t layer = 0;  // traversal position k
  double lambda = 0.0;
  std::uint64_t proposals = 0;
  std::uint64_t accepts = 0;
  double energy_before = 0.0;  // sum over chains, potential before the m steps
  double energy_after = 0.0;
  std::uint64_t chains = 0;

  double acceptance_rate() const {
    return proposals ? static_cast<double>(accepts) / static_cast<double>(proposals) : 0.0;
  }
  double mean_energy_before() const { return chains ? energy_before / chains : 0.0; }
  double mean_energy_after() const { return chains ? energy_after / chains : 0.0; }
};

struct ChainDiagnostics {
  std::vector<LayerDiagnostics> layers;  // one entry per traversal position

  std::uint64_t proposals() const;
  std::uint64_t accepts() const;
  std::vector<double> lambdas() const;
  void merge(const ChainDiagnostics& other);
};

/// Lambda used after the k-th inverse layer (1-based traversal position).
double lambda_for(std::size_t k, std::size_t n, LambdaOrder order);

/// Anchor for the target energy, one row per state row.
DenseMatrix compute_anchor(const GruNfModel& model, const DenseMatrix& h, AnchorMode mode);

/// z -> NF_1 -> MCMC_1 -> ... -> NF_n -> MCMC_n for one latent (1 x d) and
/// state (1 x H). `rng` drives the proposals.
std::pair<DenseMatrix, ChainDiagnostics> refine_sample(const DenseMatrix& z, const DenseMatrix& h,
                                                       const GruNfModel& model,
                                                       const SamplerConfig& cfg, Rng& rng);

struct RefinedSamples {
  SampleSet samples;
  ChainDiagnostics diagnostics;
};

/// Same rollout as sample_plain with each per-step draw refined. Latents
/// come from the same streams as sample_plain; proposals for trajectory i at
/// step t use stream ("sampling/mh", window_index, i * horizon + t). With
/// cfg.steps == 0 the result equals sample_plain bitwise.
RefinedSamples sample_refined(const GruNfModel& model, const DenseMatrix& window,
                              std::size_t horizon, std::size_t count, const SamplerConfig& cfg,
                              std::size_t window_index = 0, std::size_t threads = 1);

std::string format_diagnostics_jsonl(const ChainDiagnostics& diag, const std::string& window_id);

}  // namespace grusnf

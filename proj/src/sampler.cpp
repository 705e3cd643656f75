// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "sampler.hpp"

#include <cmath>

#include <json.hpp>

namespace grusnf {
namespace {

/// Refines every row of z in place of a plain flow inverse. `rngs[r]` drives
/// row r; `per_row` (rows * n entries) receives per-row layer statistics.
DenseMatrix refine_batch(const GruNfModel& model, const DenseMatrix& z, const DenseMatrix& h,
                         const SamplerConfig& cfg, std::vector<Rng>& rngs,
                         std::vector<LayerDiagnostics>& per_row) {
  const std::size_t n = model.flow.size();
  const std::size_t rows = z.rows();
  per_row.assign(rows * n, LayerDiagnostics{});
  DenseMatrix anchor;
  if (cfg.steps > 0) anchor = compute_anchor(model, h, cfg.anchor);
  DenseMatrix y = z;
  for (std::size_t k = 1; k <= n; ++k) {
    y = layer_inverse(y, h, model.flow.layers[n - k], model.flow.scale_cap);
    const double lambda = lambda_for(k, n, cfg.lambda_order);
    for (std::size_t r = 0; r < rows; ++r) {
      LayerDiagnostics& diag = per_row[r * n + (k - 1)];
      diag.layer = k;
      diag.lambda = lambda;
      if (cfg.steps == 0) continue;
      const EnergyContext ctx{lambda, anchor.row_span(r), k, n, cfg.target};
      auto row = y.row_span(r);
      diag.energy_before = potential(row, ctx);
      for (std::size_t i = 0; i < cfg.steps; ++i) {
        ++diag.proposals;
        if (mh_step(row, ctx, cfg.proposal_std, rngs[r])) ++diag.accepts;
      }
      diag.energy_after = potential(row, ctx);
      diag.chains = 1;
    }
  }
  if (!y.all_finite()) throw NumericError("refinement produced a non-finite sample");
  return y;
}

ChainDiagnostics empty_diagnostics(std::size_t n, LambdaOrder order) {
  ChainDiagnostics d;
  for (std::size_t k = 1; k <= n; ++k) {
    LayerDiagnostics l;
    l.layer = k;
    l.lambda = lambda_for(k, n, order);
    d.layers.push_back(l);
  }
  return d;
}

void add_into(LayerDiagnostics& into, const LayerDiagnostics& from) {
  into.proposals += from.proposals;
  into.accepts += from.accepts;
  into.energy_before += from.energy_before;
  into.energy_after += from.energy_after;
  into.chains += from.chains;
}

}  // namespace

void validate_sampler_config(const SamplerConfig& cfg) {
  if (!(cfg.proposal_std > 0.0) || !std::isfinite(cfg.proposal_std)) {
    throw ConfigError("proposal_std must be positive and finite");
  }
}

double prior_energy(std::span<const double> y) { return 0.5 * squared_norm(y); }

double target_energy(std::span<const double> y, std::span<const double> anchor,
                     TargetEnergy kind) {
  const double dist = euclidean_distance(anchor, y);
  return kind == TargetEnergy::kL2 ? dist : dist * dist;
}

double potential(std::span<const double> y, const EnergyContext& ctx) {
  return (1.0 - ctx.lambda) * prior_energy(y) +
         ctx.lambda * target_energy(y, ctx.anchor, ctx.target);
}

double acceptance_probability(double current_energy, double proposed_energy) {
  const double gap = proposed_energy - current_energy;
  return gap <= 0.0 ? 1.0 : std::exp(-gap);
}

bool metropolis_accept(double current_energy, double proposed_energy, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < acceptance_probability(current_energy, proposed_energy);
}

bool mh_step(std::span<double> y, const EnergyContext& ctx, double proposal_std, Rng& rng) {
  thread_local std::vector<double> proposal;
  proposal.resize(y.size());
  std::normal_distribution<double> normal(0.0, proposal_std);
  for (std::size_t i = 0; i < y.size(); ++i) proposal[i] = y[i] + normal(rng);
  const bool accepted = metropolis_accept(potential(y, ctx), potential(proposal, ctx), rng);
  if (accepted) std::copy(proposal.begin(), proposal.end(), y.begin());
  return accepted;
}

std::pair<std::vector<double>, bool> mh_step(std::span<const double> y, const EnergyContext& ctx,
                                             const SamplerConfig& cfg, Rng& rng) {
  std::vector<double> state(y.begin(), y.end());
  const bool accepted = mh_step(std::span<double>(state), ctx, cfg.proposal_std, rng);
  return {std::move(state), accepted};
}

std::uint64_t ChainDiagnostics::proposals() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.proposals;
  return n;
}

std::uint64_t ChainDiagnostics::accepts() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.accepts;
  return n;
}

std::vector<double> ChainDiagnostics::lambdas() const {
  std::vector<double> out;
  for (const auto& l : layers) out.push_back(l.lambda);
  return out;
}

void ChainDiagnostics::merge(const ChainDiagnostics& other) {
  if (layers.empty()) {
    layers = other.layers;
    return;
  }
  if (other.layers.size() != layers.size()) throw ContractError("diagnostics layer count differs");
  for (std::size_t i = 0; i < layers.size(); ++i) add_into(layers[i], other.layers[i]);
}

double lambda_for(std::size_t k, std::size_t n, LambdaOrder order) {
  if (k == 0 || k > n) throw ContractError("lambda_for: k must be in 1..n");
  const std::size_t position = order == LambdaOrder::kTraversal ? k : n - k + 1;
  return static_cast<double>(position) / static_cast<double>(n);
}

DenseMatrix compute_anchor(const GruNfModel& model, const DenseMatrix& h, AnchorMode mode) {
  if (mode == AnchorMode::kReadout) return predict(h, model.gru);
  return inverse(DenseMatrix(h.rows(), model.dims.dim), h, model.flow);
}

std::pair<DenseMatrix, ChainDiagnostics> refine_sample(const DenseMatrix& z, const DenseMatrix& h,
                                                       const GruNfModel& model,
                                                       const SamplerConfig& cfg, Rng& rng) {
  validate_sampler_config(cfg);
  if (z.rows() != 1 || h.rows() != 1) throw ShapeError("refine_sample expects single rows");
  if (z.cols() != model.dims.dim || h.cols() != model.dims.hidden) {
    throw ShapeError("refine_sample: latent or state width does not match the model");
  }
  if (!z.all_finite()) throw NumericError("refine_sample: non-finite latent");
  std::vector<Rng> rngs{rng};
  std::vector<LayerDiagnostics> per_row;
  DenseMatrix y = refine_batch(model, z, h, cfg, rngs, per_row);
  rng = rngs.front();
  ChainDiagnostics diag;
  diag.layers = per_row;
  return {std::move(y), std::move(diag)};
}

RefinedSamples sample_refined(const GruNfModel& model, const DenseMatrix& window,
                              std::size_t horizon, std::size_t count, const SamplerConfig& cfg,
                              std::size_t window_index, std::size_t threads) {
  validate_sampler_config(cfg);
  if (horizon == 0 || count == 0) {
    throw ContractError("sample_refined: horizon and count must be >= 1");
  }
  const DenseMatrix h_window = encode(model, window);
  const std::size_t d = model.dims.dim;
  const std::size_t n = model.flow.size();

  RefinedSamples out;
  out.samples.model_tag = "refined";
  out.samples.horizon = horizon;
  out.samples.dim = d;
  out.samples.trajectories.assign(count, DenseMatrix(horizon, d));
  // Per trajectory, per layer; reduced in trajectory order afterwards.
  std::vector<LayerDiagnostics> stats(count * n);

  parallel_chunks(count, threads, [&](std::size_t begin, std::size_t end) {
    const std::size_t rows = end - begin;
    auto streams = latent_streams(cfg.seed, window_index, begin, end);
    DenseMatrix h = repeat_row(h_window, rows);
    DenseMatrix z(rows, d);
    std::vector<Rng> mh_rngs(rows);
    std::vector<LayerDiagnostics> per_row;
    for (std::size_t t = 0; t < horizon; ++t) {
      draw_latents(streams, z);
      if (cfg.steps > 0) {
        for (std::size_t r = 0; r < rows; ++r) {
          mh_rngs[r] = make_stream(cfg.seed, "sampling/mh", {window_index, (begin + r) * horizon + t});
        }
      }
      const DenseMatrix y = refine_batch(model, z, h, cfg, mh_rngs, per_row);
      for (std::size_t r = 0; r < rows; ++r) {
        auto src = y.row_span(r);
        std::copy(src.begin(), src.end(), out.samples.trajectories[begin + r].row_span(t).begin());
        for (std::size_t k = 0; k < n; ++k) add_into(stats[(begin + r) * n + k], per_row[r * n + k]);
      }
      h = gru_step(y, h, model.gru);
    }
  });

  out.diagnostics = empty_diagnostics(n, cfg.lambda_order);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < n; ++k) add_into(out.diagnostics.layers[k], stats[i * n + k]);
  }
  return out;
}

std::string format_diagnostics_jsonl(const ChainDiagnostics& diag, const std::string& window_id) {
  std::string out;
  for (const auto& l : diag.layers) {
    nlohmann::ordered_json j;
    j["window_id"] = window_id;
    j["layer"] = l.layer;
    j["lambda"] = l.lambda;
    j["proposals"] = l.proposals;
    j["accepts"] = l.accepts;
    j["acceptance_rate"] = l.acceptance_rate();
    j["mean_energy_before"] = l.mean_energy_before();
    j["mean_energy_after"] = l.mean_energy_after();
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace grusnf

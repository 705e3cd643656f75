// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "samples.hpp"

namespace grusnf {

/// V-statistic estimate of the squared energy distance between the row sets
/// of X and Y: 2 E|x-y| - E|x-x'| - E|y-y'|. Exactly symmetric in (X, Y) and
/// exactly 0 for E(X, X).
double energy_distance(const DenseMatrix& x, const DenseMatrix& y);

/// Stacks N x d trajectories into a D x (N*d) matrix of flattened rows.
DenseMatrix flatten(std::span<const DenseMatrix> trajectories);

enum class EnergyDistanceMode { kFlattened, kPerTimestep };

/// Energy distance between two trajectory sets, on flattened trajectories or
/// averaged over per-frame distances.
double trajectory_energy_distance(std::span<const DenseMatrix> a, std::span<const DenseMatrix> b,
                                  EnergyDistanceMode mode);

/// Mean absolute error over all entries.
double mae(const DenseMatrix& sample, const DenseMatrix& truth);
/// Mean Euclidean distance over unordered pairs of flattened trajectories.
double apd(std::span<const DenseMatrix> samples);

/// Indices of the C lowest-MAE samples, ties to the lower index, in
/// ascending MAE order.
std::vector<std::size_t> top_c_indices(const SampleSet& set, const DenseMatrix& truth,
                                       std::size_t c);
SampleSet select_top_c(const SampleSet& set, const DenseMatrix& truth, std::size_t c);

struct WindowMetrics {
  std::string window_id;
  double energy_distance = 0.0;
  double mae = 0.0;  // mean over the top-C samples
  double apd = 0.0;  // over the top-C samples
};

/// `reference` is the ground-truth future set used for the energy distance
/// (the single truth when no reference futures exist).
WindowMetrics window_metrics(const SampleSet& set, const DenseMatrix& truth,
                             std::span<const DenseMatrix> reference, std::size_t c,
                             EnergyDistanceMode mode);

struct ReportRow {
  WindowMetrics raw;
  double norm_mae = 0.0;
  double norm_apd = 0.0;
  double ratio = 0.0;
};

struct MetricsReport {
  std::string model_tag;
  std::vector<ReportRow> rows;
  double mean_energy_distance = 0.0;
  double mean_mae = 0.0;
  double mean_apd = 0.0;
  double mean_norm_mae = 0.0;
  double mean_norm_apd = 0.0;
  double mean_ratio = 0.0;
};

/// Smallest floor accepted for the normalized MAE before dividing.
inline constexpr double kNormalizedMaeFloor = 1e-6;

/// Min-max normalizes MAE and APD with extrema pooled over both models'
/// windows, then ratio = norm_apd / max(norm_mae, floor) per window.
std::pair<MetricsReport, MetricsReport> normalized_ratio_report(
    const std::vector<WindowMetrics>& plain, const std::vector<WindowMetrics>& refined,
    double mae_floor = kNormalizedMaeFloor);

/// Percentage change of `refined` relative to `plain`; 0 when equal.
double improvement_pct(double plain, double refined);

/// Gaussian KDE with Silverman's bandwidth, sampled at `points` evenly spaced
/// x over [min - 3b, max + 3b].
std::vector<std::pair<double, double>> density_curve(std::span<const double> values,
                                                     std::size_t points);
double silverman_bandwidth(std::span<const double> values);

std::string format_report_csv(const MetricsReport& plain, const MetricsReport& refined);
std::string format_summary_json(const MetricsReport& plain, const MetricsReport& refined,
                                std::size_t c, std::size_t d);
std::string format_density_csv(const std::vector<std::pair<double, double>>& curve);

}  // namespace grusnf

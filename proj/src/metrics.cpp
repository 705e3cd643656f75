// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <json.hpp>

#include "errors.hpp"
#include "io.hpp"

namespace grusnf {
namespace {

double pair_sum(const DenseMatrix& a, const DenseMatrix& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) acc += euclidean_distance(a.row_span(i), b.row_span(j));
  }
  return acc;
}

// Strict weak order on matrices used to canonicalize argument order.
bool canonical_less(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  auto va = a.values();
  auto vb = b.values();
  return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end());
}

double mean_of(const std::vector<ReportRow>& rows, double ReportRow::*field) {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.*field;
  return acc / static_cast<double>(rows.size());
}

double mean_raw(const std::vector<ReportRow>& rows, double WindowMetrics::*field) {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.raw.*field;
  return acc / static_cast<double>(rows.size());
}

}  // namespace

double energy_distance(const DenseMatrix& x_in, const DenseMatrix& y_in) {
  if (x_in.rows() == 0 || y_in.rows() == 0) throw ContractError("energy_distance: empty set");
  if (x_in.cols() != y_in.cols()) {
    throw ShapeError("energy_distance: dimension " + std::to_string(x_in.cols()) + " vs " +
                     std::to_string(y_in.cols()));
  }
  const bool swap = canonical_less(y_in, x_in);
  const DenseMatrix& x = swap ? y_in : x_in;
  const DenseMatrix& y = swap ? x_in : y_in;
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(y.rows());
  const double cross = pair_sum(x, y) / (n * m);
  const double within_x = pair_sum(x, x) / (n * n);
  const double within_y = pair_sum(y, y) / (m * m);
  return 2.0 * cross - within_x - within_y;
}

DenseMatrix flatten(std::span<const DenseMatrix> trajectories) {
  if (trajectories.empty()) return {};
  const std::size_t width = trajectories.front().size();
  DenseMatrix out(trajectories.size(), width);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].size() != width) throw ShapeError("flatten: trajectories differ in shape");
    auto src = trajectories[i].values();
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return out;
}

double trajectory_energy_distance(std::span<const DenseMatrix> a, std::span<const DenseMatrix> b,
                                  EnergyDistanceMode mode) {
  if (a.empty() || b.empty()) throw ContractError("energy_distance: empty set");
  if (mode == EnergyDistanceMode::kFlattened) return energy_distance(flatten(a), flatten(b));
  const std::size_t steps = a.front().rows();
  const std::size_t d = a.front().cols();
  if (b.front().rows() != steps || b.front().cols() != d) {
    throw ShapeError("energy_distance: trajectory shapes differ");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    DenseMatrix fa(a.size(), d), fb(b.size(), d);
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto src = a[i].row_span(t);
      std::copy(src.begin(), src.end(), fa.row_span(i).begin());
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto src = b[i].row_span(t);
      std::copy(src.begin(), src.end(), fb.row_span(i).begin());
    }
    acc += energy_distance(fa, fb);
  }
  return acc / static_cast<double>(steps);
}

double mae(const DenseMatrix& sample, const DenseMatrix& truth) {
  if (!sample.same_shape(truth)) throw ShapeError("mae: sample and truth shapes differ");
  if (sample.empty()) throw ContractError("mae: empty trajectory");
  double acc = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) acc += std::fabs(sample[i] - truth[i]);
  return acc / static_cast<double>(sample.size());
}

double apd(std::span<const DenseMatrix> samples) {
  if (samples.size() < 2) throw ContractError("apd: need at least 2 samples");
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      if (!samples[i].same_shape(samples[j])) throw ShapeError("apd: samples differ in shape");
      acc += euclidean_distance(samples[i].values(), samples[j].values());
      ++pairs;
    }
  }
  return acc / static_cast<double>(pairs);
}

std::vector<std::size_t> top_c_indices(const SampleSet& set, const DenseMatrix& truth,
                                       std::size_t c) {
  if (c == 0 || c > set.count()) {
    throw ContractError("select_top_c: C=" + std::to_string(c) + " with D=" +
                        std::to_string(set.count()));
  }
  std::vector<double> errors(set.count());
  for (std::size_t i = 0; i < set.count(); ++i) errors[i] = mae(set.trajectories[i], truth);
  std::vector<std::size_t> order(set.count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return errors[a] < errors[b]; });
  order.resize(c);
  return order;
}

SampleSet select_top_c(const SampleSet& set, const DenseMatrix& truth, std::size_t c) {
  SampleSet out = set;
  out.trajectories.clear();
  for (std::size_t i : top_c_indices(set, truth, c)) out.trajectories.push_back(set.trajectories[i]);
  return out;
}

WindowMetrics window_metrics(const SampleSet& set, const DenseMatrix& truth,
                             std::span<const DenseMatrix> reference, std::size_t c,
                             EnergyDistanceMode mode) {
  validate_sample_set(set);
  WindowMetrics w;
  w.window_id = set.window_id;
  if (reference.empty()) {
    const DenseMatrix only[] = {truth};
    w.energy_distance = trajectory_energy_distance(only, set.trajectories, mode);
  } else {
    w.energy_distance = trajectory_energy_distance(reference, set.trajectories, mode);
  }
  const SampleSet top = select_top_c(set, truth, c);
  double acc = 0.0;
  for (const auto& t : top.trajectories) acc += mae(t, truth);
  w.mae = acc / static_cast<double>(top.count());
  w.apd = top.count() >= 2 ? apd(top.trajectories) : 0.0;
  return w;
}

std::pair<MetricsReport, MetricsReport> normalized_ratio_report(
    const std::vector<WindowMetrics>& plain, const std::vector<WindowMetrics>& refined,
    double mae_floor) {
  if (!(mae_floor >= kNormalizedMaeFloor) || !(mae_floor <= 1.0)) {
    throw ContractError("ratio report: MAE floor must lie in [1e-6, 1]");
  }
  if (plain.empty() || refined.empty()) throw ContractError("ratio report: no windows");
  {
    std::set<std::string> a, b;
    for (const auto& w : plain) a.insert(w.window_id);
    for (const auto& w : refined) b.insert(w.window_id);
    std::string missing;
    for (const auto& id : a) if (!b.count(id)) missing += " " + id + "(refined)";
    for (const auto& id : b) if (!a.count(id)) missing += " " + id + "(plain)";
    if (!missing.empty() || plain.size() != refined.size()) {
      throw ContractError("ratio report: window sets differ; missing:" + missing);
    }
  }
  double mae_lo = plain.front().mae, mae_hi = mae_lo;
  double apd_lo = plain.front().apd, apd_hi = apd_lo;
  for (const auto* part : {&plain, &refined}) {
    for (const auto& w : *part) {
      mae_lo = std::min(mae_lo, w.mae);
      mae_hi = std::max(mae_hi, w.mae);
      apd_lo = std::min(apd_lo, w.apd);
      apd_hi = std::max(apd_hi, w.apd);
    }
  }
  if (!(mae_hi > mae_lo)) throw ContractError("normalization error: pooled MAE range is degenerate");
  if (!(apd_hi > apd_lo)) throw ContractError("normalization error: pooled APD range is degenerate");

  auto build = [&](const std::vector<WindowMetrics>& windows, const char* tag) {
    MetricsReport r;
    r.model_tag = tag;
    for (const auto& w : windows) {
      ReportRow row;
      row.raw = w;
      row.norm_mae = (w.mae - mae_lo) / (mae_hi - mae_lo);
      row.norm_apd = (w.apd - apd_lo) / (apd_hi - apd_lo);
      row.ratio = row.norm_apd / std::max(row.norm_mae, mae_floor);
      r.rows.push_back(row);
    }
    r.mean_energy_distance = mean_raw(r.rows, &WindowMetrics::energy_distance);
    r.mean_mae = mean_raw(r.rows, &WindowMetrics::mae);
    r.mean_apd = mean_raw(r.rows, &WindowMetrics::apd);
    r.mean_norm_mae = mean_of(r.rows, &ReportRow::norm_mae);
    r.mean_norm_apd = mean_of(r.rows, &ReportRow::norm_apd);
    r.mean_ratio = mean_of(r.rows, &ReportRow::ratio);
    return r;
  };
  return {build(plain, "plain"), build(refined, "refined")};
}

double improvement_pct(double plain, double refined) {
  if (plain == refined) return 0.0;
  return (refined - plain) / std::fabs(plain) * 100.0;
}

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ContractError("density_curve: need at least 2 values");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) {
    throw ContractError("density_curve: values have zero spread; use a histogram instead");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<std::pair<double, double>> density_curve(std::span<const double> values,
                                                     std::size_t points) {
  if (points < 2) throw ContractError("density_curve: need at least 2 evaluation points");
  const double b = silverman_bandwidth(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it - 3.0 * b, hi = *hi_it + 3.0 * b;
  const double norm = 1.0 / (static_cast<double>(values.size()) * b * std::sqrt(2.0 * std::numbers::pi));
  std::vector<std::pair<double, double>> curve;
  curve.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    double acc = 0.0;
    for (double v : values) {
      const double u = (x - v) / b;
      acc += std::exp(-0.5 * u * u);
    }
    curve.emplace_back(x, acc * norm);
  }
  return curve;
}

std::string format_report_csv(const MetricsReport& plain, const MetricsReport& refined) {
  std::string out = "window_id,model,energy_distance,mae,apd,norm_mae,norm_apd,ratio\n";
  for (const auto* rep : {&plain, &refined}) {
    for (const auto& r : rep->rows) {
      out += r.raw.window_id + "," + rep->model_tag + "," + format_double(r.raw.energy_distance, 17) +
             "," + format_double(r.raw.mae, 17) + "," + format_double(r.raw.apd, 17) + "," +
             format_double(r.norm_mae, 17) + "," + format_double(r.norm_apd, 17) + "," +
             format_double(r.ratio, 17) + "\n";
    }
  }
  return out;
}

std::string format_summary_json(const MetricsReport& plain, const MetricsReport& refined,
                                std::size_t c, std::size_t d) {
  auto means = [](const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["energy_distance"] = r.mean_energy_distance;
    j["mae"] = r.mean_mae;
    j["apd"] = r.mean_apd;
    j["norm_mae"] = r.mean_norm_mae;
    j["norm_apd"] = r.mean_norm_apd;
    j["apd_to_mae_ratio"] = r.mean_ratio;
    return j;
  };
  nlohmann::ordered_json j;
  j["space"] = "keypoint";
  j["windows"] = plain.rows.size();
  j["top_c"] = c;
  j["samples_per_window"] = d;
  j["models"]["plain"] = means(plain);
  j["models"]["refined"] = means(refined);
  j["improvement_pct"]["apd_to_mae_ratio"] = improvement_pct(plain.mean_ratio, refined.mean_ratio);
  // Lower energy distance is better, so a reduction counts as improvement.
  j["improvement_pct"]["energy_distance"] =
      0.0 - improvement_pct(plain.mean_energy_distance, refined.mean_energy_distance);
  return j.dump(2) + "\n";
}

std::string format_density_csv(const std::vector<std::pair<double, double>>& curve) {
  std::string out = "x,density\n";
  for (const auto& [x, y] : curve) out += format_double(x, 17) + "," + format_double(y, 17) + "\n";
  return out;
}

}  // namespace grusnf

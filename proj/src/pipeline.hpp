// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace grusnf {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };
void set_log_level(LogLevel level);
void log_info(const std::string& msg);
void log_warning(const std::string& msg);

// Layout of a run directory.
std::filesystem::path data_dir(const RunConfig& cfg);
std::filesystem::path model_dir(const RunConfig& cfg);
std::filesystem::path samples_dir(const RunConfig& cfg);
std::filesystem::path report_dir(const RunConfig& cfg);
std::filesystem::path checkpoint_path(const RunConfig& cfg);
std::filesystem::path samples_path(const RunConfig& cfg, const std::string& mode);

/// Writes the resolved configuration as config.txt inside `dir`.
void write_config_copy(const RunConfig& cfg, const std::filesystem::path& dir);

DatasetSplit generate_dataset(const RunConfig& cfg);

GruNfModel make_model(const RunConfig& cfg, std::size_t dim);
TrainResult train_model(GruNfModel& model, const DatasetSplit& split, const RunConfig& cfg);

/// All test windows sampled with one mode.
struct SampleRun {
  std::string mode;  // "plain" or "refined"
  std::vector<SampleSet> sets;
  ChainDiagnostics diagnostics;  // summed over windows (refined only)
  std::vector<ChainDiagnostics> per_window;
};

SampleRun sample_test_windows(const GruNfModel& model, const DatasetSplit& split,
                              const RunConfig& cfg, const std::string& mode);

/// One JSON object per sample: window_id, sample_id, model, values (N x d).
std::string format_samples_jsonl(const SampleRun& run);
SampleRun parse_samples_jsonl(const std::string& text, const std::string& source = "<samples>");
std::string format_run_diagnostics(const SampleRun& run);

struct Evaluation {
  MetricsReport plain;
  MetricsReport refined;
  std::vector<std::pair<double, double>> density_plain;
  std::vector<std::pair<double, double>> density_refined;
  std::string summary_json;
};

Evaluation evaluate_runs(const SampleRun& plain, const SampleRun& refined,
                         const DatasetSplit& split, const RunConfig& cfg);
void write_evaluation(const Evaluation& eval, const std::filesystem::path& dir);

/// gen-data -> train -> sample (plain, refined) -> evaluate into cfg.out_dir.
Evaluation run_compare(const RunConfig& cfg);

}  // namespace grusnf

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pipeline.hpp"

#include <atomic>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "io.hpp"

namespace grusnf {
namespace {

std::atomic<int> g_log_level{static_cast<int>(LogLevel::kInfo)};

const KeypointSequence& find_test(const DatasetSplit& split, const std::string& id) {
  for (const auto& s : split.test) {
    if (s.id == id) return s;
  }
  throw ContractError("window " + id + " is not in the test split");
}

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(name) + ": " + e.what());
  }
}

}  // namespace

void set_log_level(LogLevel level) { g_log_level = static_cast<int>(level); }

void log_info(const std::string& msg) {
  if (g_log_level >= static_cast<int>(LogLevel::kInfo)) std::cerr << "[grusnf] " << msg << "\n";
}

void log_warning(const std::string& msg) {
  if (g_log_level >= static_cast<int>(LogLevel::kInfo)) {
    std::cerr << "[grusnf] warning: " << msg << "\n";
  }
}

std::filesystem::path data_dir(const RunConfig& cfg) { return cfg.out_dir / "data"; }
std::filesystem::path model_dir(const RunConfig& cfg) { return cfg.out_dir / "model"; }
std::filesystem::path samples_dir(const RunConfig& cfg) { return cfg.out_dir / "samples"; }
std::filesystem::path report_dir(const RunConfig& cfg) { return cfg.out_dir / "report"; }
std::filesystem::path checkpoint_path(const RunConfig& cfg) {
  return model_dir(cfg) / "checkpoint.bin";
}
std::filesystem::path samples_path(const RunConfig& cfg, const std::string& mode) {
  return samples_dir(cfg) / (mode + ".jsonl");
}

void write_config_copy(const RunConfig& cfg, const std::filesystem::path& dir) {
  write_text_file(dir / "config.txt", cfg.rendered);
}

DatasetSplit generate_dataset(const RunConfig& cfg) {
  DatasetSplit split = gen_forked(cfg.data);
  log_info("generated " + std::to_string(split.train.size()) + " train / " +
           std::to_string(split.val.size()) + " val / " + std::to_string(split.test.size()) +
           " test sequences (d=" + std::to_string(split.dim()) + ")");
  return split;
}

GruNfModel make_model(const RunConfig& cfg, std::size_t dim) {
  ModelDims dims = cfg.dims;
  dims.dim = dim;
  return init_model(dims, derive_seed(cfg.seed, "init"));
}

TrainResult train_model(GruNfModel& model, const DatasetSplit& split, const RunConfig& cfg) {
  if (split.dim() != model.dims.dim) {
    throw ConfigError("dataset has d=" + std::to_string(split.dim()) + " but the model has d=" +
                      std::to_string(model.dims.dim));
  }
  const std::size_t epochs = cfg.train.epochs;
  return train(model, split.train, split.val, cfg.train, [epochs](const EpochStats& e) {
    log_info("epoch " + std::to_string(e.epoch) + "/" + std::to_string(epochs) +
             " train_nll=" + format_double(e.train_nll, 6) + " val_nll=" +
             format_double(e.val_nll, 6));
  });
}

SampleRun sample_test_windows(const GruNfModel& model, const DatasetSplit& split,
                              const RunConfig& cfg, const std::string& mode) {
  if (mode != "plain" && mode != "refined") {
    throw ConfigError("mode must be plain or refined, got '" + mode + "'");
  }
  if (split.dim() != model.dims.dim) {
    throw ConfigError("dimension mismatch: checkpoint has d=" + std::to_string(model.dims.dim) +
                      " but the dataset has d=" + std::to_string(split.dim()));
  }
  SampleRun run;
  run.mode = mode;
  for (std::size_t w = 0; w < split.test.size(); ++w) {
    const KeypointSequence& seq = split.test[w];
    const auto [window, truth] = window_split(seq, cfg.input_frames, cfg.output_frames);
    if (mode == "plain") {
      SampleSet set = sample_plain(model, window, cfg.output_frames, cfg.samples,
                                   cfg.sampler.seed, w, cfg.threads);
      set.window_id = seq.id;
      run.sets.push_back(std::move(set));
    } else {
      RefinedSamples r = sample_refined(model, window, cfg.output_frames, cfg.samples,
                                        cfg.sampler, w, cfg.threads);
      r.samples.window_id = seq.id;
      run.sets.push_back(std::move(r.samples));
      run.diagnostics.merge(r.diagnostics);
      run.per_window.push_back(std::move(r.diagnostics));
    }
  }
  if (mode == "refined" && cfg.sampler.steps > 0) {
    for (const auto& l : run.diagnostics.layers) {
      const double rate = l.acceptance_rate();
      log_info("layer " + std::to_string(l.layer) + " lambda=" + format_double(l.lambda, 4) +
               " acceptance=" + format_double(rate, 4));
      if (rate < 0.05 || rate > 0.95) {
        log_warning("acceptance rate " + format_double(rate, 4) + " at layer " +
                    std::to_string(l.layer) + "; consider retuning sampler.proposal_std");
      }
    }
  }
  return run;
}

std::string format_samples_jsonl(const SampleRun& run) {
  std::string out;
  for (const auto& set : run.sets) {
    for (std::size_t i = 0; i < set.count(); ++i) {
      nlohmann::ordered_json j;
      j["window_id"] = set.window_id;
      j["sample_id"] = i;
      j["model"] = run.mode;
      auto values = nlohmann::json::array();
      const DenseMatrix& t = set.trajectories[i];
      for (std::size_t r = 0; r < t.rows(); ++r) {
        auto row = t.row_span(r);
        values.push_back(std::vector<double>(row.begin(), row.end()));
      }
      j["values"] = std::move(values);
      out += j.dump() + "\n";
    }
  }
  return out;
}

SampleRun parse_samples_jsonl(const std::string& text, const std::string& source) {
  SampleRun run;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw FormatError(source + ":" + std::to_string(line_no) + ": " + msg, line_no);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.contains("window_id") || !j.contains("sample_id") || !j.contains("model") ||
        !j.contains("values")) {
      fail("record needs window_id, sample_id, model and values");
    }
    const std::string window = j["window_id"].get<std::string>();
    const std::string mode = j["model"].get<std::string>();
    if (run.mode.empty()) run.mode = mode;
    if (mode != run.mode) fail("mixed model tags '" + run.mode + "' and '" + mode + "'");
    const auto& values = j["values"];
    if (!values.is_array() || values.empty()) fail("values must be a non-empty array of frames");
    const std::size_t rows = values.size();
    const std::size_t cols = values[0].size();
    DenseMatrix traj(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!values[r].is_array() || values[r].size() != cols) fail("ragged values array");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!values[r][c].is_number()) fail("non-numeric value");
        traj(r, c) = values[r][c].get<double>();
      }
    }
    if (run.sets.empty() || run.sets.back().window_id != window) {
      for (const auto& s : run.sets) {
        if (s.window_id == window) fail("window " + window + " is not contiguous");
      }
      SampleSet set;
      set.window_id = window;
      set.model_tag = mode;
      set.horizon = rows;
      set.dim = cols;
      run.sets.push_back(std::move(set));
    }
    SampleSet& set = run.sets.back();
    if (j["sample_id"].get<std::size_t>() != set.count()) fail("sample ids must count up from 0");
    if (rows != set.horizon || cols != set.dim) fail("trajectory shape differs within window");
    set.trajectories.push_back(std::move(traj));
  }
  if (run.sets.empty()) throw FormatError(source + ": no samples");
  return run;
}

std::string format_run_diagnostics(const SampleRun& run) {
  std::string out;
  for (std::size_t i = 0; i < run.per_window.size(); ++i) {
    out += format_diagnostics_jsonl(run.per_window[i], run.sets[i].window_id);
  }
  return out;
}

Evaluation evaluate_runs(const SampleRun& plain, const SampleRun& refined,
                         const DatasetSplit& split, const RunConfig& cfg) {
  auto metrics_for = [&](const SampleRun& run) {
    std::vector<WindowMetrics> out;
    for (const auto& set : run.sets) {
      const KeypointSequence& seq = find_test(split, set.window_id);
      const auto [window, truth] = window_split(seq, cfg.input_frames, cfg.output_frames);
      if (set.horizon != truth.rows() || set.dim != truth.cols()) {
        throw ContractError("samples for window " + set.window_id + " are " +
                            std::to_string(set.horizon) + "x" + std::to_string(set.dim) +
                            ", truth is " + std::to_string(truth.rows()) + "x" +
                            std::to_string(truth.cols()));
      }
      std::vector<DenseMatrix> reference;
      if (cfg.family_reference) {
        for (const KeypointSequence* r : split.references_for(seq.id)) {
          reference.push_back(window_split(*r, cfg.input_frames, cfg.output_frames).second);
        }
      }
      out.push_back(window_metrics(set, truth, reference, std::min(cfg.top_c, set.count()),
                                   cfg.ed_mode));
    }
    return out;
  };
  Evaluation eval;
  std::tie(eval.plain, eval.refined) =
      normalized_ratio_report(metrics_for(plain), metrics_for(refined), cfg.mae_floor);
  auto curve = [&](const MetricsReport& r) {
    std::vector<double> ratios;
    for (const auto& row : r.rows) ratios.push_back(row.ratio);
    try {
      return density_curve(ratios, cfg.density_points);
    } catch (const ContractError& e) {
      log_warning(std::string("no density curve for ") + r.model_tag + ": " + e.what());
      return std::vector<std::pair<double, double>>{};
    }
  };
  eval.density_plain = curve(eval.plain);
  eval.density_refined = curve(eval.refined);
  const std::size_t d = plain.sets.empty() ? 0 : plain.sets.front().count();
  eval.summary_json = format_summary_json(eval.plain, eval.refined, cfg.top_c, d);
  return eval;
}

void write_evaluation(const Evaluation& eval, const std::filesystem::path& dir) {
  write_text_file(dir / "windows.csv", format_report_csv(eval.plain, eval.refined));
  write_text_file(dir / "summary.json", eval.summary_json);
  write_text_file(dir / "density_plain.csv", format_density_csv(eval.density_plain));
  write_text_file(dir / "density_refined.csv", format_density_csv(eval.density_refined));
}

Evaluation run_compare(const RunConfig& cfg) {
  write_config_copy(cfg, cfg.out_dir);
  const DatasetSplit split = stage("gen-data", [&] {
    DatasetSplit s = generate_dataset(cfg);
    save_split(s, data_dir(cfg));
    write_config_copy(cfg, data_dir(cfg));
    return s;
  });
  const GruNfModel model = stage("train", [&] {
    GruNfModel m = make_model(cfg, split.dim());
    try {
      const TrainResult r = train_model(m, split, cfg);
      write_text_file(model_dir(cfg) / "loss.csv", format_loss_csv(r));
    } catch (const TrainingError&) {
      save_checkpoint(m, checkpoint_path(cfg));
      throw;
    }
    save_checkpoint(m, checkpoint_path(cfg));
    write_config_copy(cfg, model_dir(cfg));
    return m;
  });
  auto sample = [&](const std::string& mode) {
    return stage("sample", [&] {
      SampleRun run = sample_test_windows(model, split, cfg, mode);
      write_text_file(samples_path(cfg, mode), format_samples_jsonl(run));
      if (mode == "refined") {
        write_text_file(samples_dir(cfg) / "refined_diagnostics.jsonl", format_run_diagnostics(run));
      }
      write_config_copy(cfg, samples_dir(cfg));
      return run;
    });
  };
  const SampleRun plain = sample("plain");
  const SampleRun refined = sample("refined");
  return stage("evaluate", [&] {
    Evaluation eval = evaluate_runs(plain, refined, split, cfg);
    write_evaluation(eval, report_dir(cfg));
    write_config_copy(cfg, report_dir(cfg));
    return eval;
  });
}

}  // namespace grusnf

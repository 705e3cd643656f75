// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <new>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "grusnf/grusnf.h"
#include "io.hpp"
#include "pipeline.hpp"

struct gsnf_config {
  grusnf::ConfigMap map;
};
struct gsnf_dataset {
  grusnf::DatasetSplit split;
};
struct gsnf_model {
  grusnf::GruNfModel model;
};
struct gsnf_samples {
  grusnf::SampleRun run;
};
struct gsnf_report {
  grusnf::Evaluation eval;
};

namespace {

thread_local std::string g_last_error;

template <class F>
gsnf_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return GSNF_OK;
  } catch (const grusnf::Error& e) {
    g_last_error = e.what();
    return static_cast<gsnf_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GSNF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GSNF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return GSNF_ERR_INTERNAL;
  }
}

template <class T>
void require(const T* p, const char* name) {
  if (p == nullptr) throw grusnf::ContractError(std::string(name) + " is NULL");
}

std::string str(const char* s, const char* name) {
  require(s, name);
  return s;
}

}  // namespace

extern "C" {

const char* gsnf_version(void) { return "0.1.0"; }

const char* gsnf_last_error(void) { return g_last_error.c_str(); }

void gsnf_set_log_level(int level) {
  grusnf::set_log_level(level <= 0   ? grusnf::LogLevel::kQuiet
                        : level == 1 ? grusnf::LogLevel::kInfo
                                     : grusnf::LogLevel::kDebug);
}

gsnf_status gsnf_config_create(gsnf_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new gsnf_config{};
  });
}

gsnf_status gsnf_config_load(gsnf_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    cfg->map.merge_file(str(path, "path"));
  });
}

gsnf_status gsnf_config_set(gsnf_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    cfg->map.set(str(key, "key"), str(value, "value"));
  });
}

gsnf_status gsnf_config_get(const gsnf_config* cfg, const char* key, char* buf, size_t buf_size,
                            size_t* needed) {
  return guarded([&] {
    require(cfg, "config");
    const std::string& v = cfg->map.get(str(key, "key"));
    if (needed != nullptr) *needed = v.size() + 1;
    if (buf != nullptr && buf_size > 0) {
      const size_t n = std::min(buf_size - 1, v.size());
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
    }
  });
}

gsnf_status gsnf_config_validate(const gsnf_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    (void)grusnf::resolve(cfg->map);
  });
}

gsnf_status gsnf_config_save(const gsnf_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    grusnf::write_text_file(str(path, "path"), cfg->map.render());
  });
}

void gsnf_config_destroy(gsnf_config* cfg) { delete cfg; }

gsnf_status gsnf_dataset_generate(const gsnf_config* cfg, gsnf_dataset** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new gsnf_dataset{grusnf::generate_dataset(grusnf::resolve(cfg->map))};
  });
}

gsnf_status gsnf_dataset_load(const char* dir, gsnf_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = new gsnf_dataset{grusnf::load_split(str(dir, "dir"))};
  });
}

gsnf_status gsnf_dataset_save(const gsnf_dataset* data, const char* dir) {
  return guarded([&] {
    require(data, "dataset");
    grusnf::save_split(data->split, str(dir, "dir"));
  });
}

gsnf_status gsnf_dataset_size(const gsnf_dataset* data, const char* split, size_t* count) {
  return guarded([&] {
    require(data, "dataset");
    require(count, "count");
    const std::string s = str(split, "split");
    if (s == "train") {
      *count = data->split.train.size();
    } else if (s == "val") {
      *count = data->split.val.size();
    } else if (s == "test") {
      *count = data->split.test.size();
    } else if (s == "reference") {
      *count = data->split.reference.size();
    } else {
      throw grusnf::ContractError("unknown split '" + s + "'");
    }
  });
}

size_t gsnf_dataset_dim(const gsnf_dataset* data) {
  return data == nullptr ? 0 : data->split.dim();
}

void gsnf_dataset_destroy(gsnf_dataset* data) { delete data; }

gsnf_status gsnf_model_create(const gsnf_config* cfg, size_t dim, gsnf_model** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new gsnf_model{grusnf::make_model(grusnf::resolve(cfg->map), dim)};
  });
}

gsnf_status gsnf_model_train(gsnf_model* model, const gsnf_dataset* data, const gsnf_config* cfg,
                             const char* loss_csv_path) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    require(cfg, "config");
    const grusnf::TrainResult r =
        grusnf::train_model(model->model, data->split, grusnf::resolve(cfg->map));
    if (loss_csv_path != nullptr) {
      grusnf::write_text_file(loss_csv_path, grusnf::format_loss_csv(r));
    }
  });
}

gsnf_status gsnf_model_save(const gsnf_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    grusnf::save_checkpoint(model->model, str(path, "path"));
  });
}

gsnf_status gsnf_model_load(const char* path, gsnf_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = new gsnf_model{grusnf::load_checkpoint(str(path, "path"))};
  });
}

size_t gsnf_model_dim(const gsnf_model* model) {
  return model == nullptr ? 0 : model->model.dims.dim;
}

void gsnf_model_destroy(gsnf_model* model) { delete model; }

gsnf_status gsnf_sample(const gsnf_model* model, const gsnf_dataset* data, const gsnf_config* cfg,
                        const char* mode, const char* diagnostics_path, gsnf_samples** out) {
  return guarded([&] {
    require(model, "model");
    require(data, "dataset");
    require(cfg, "config");
    require(out, "out");
    grusnf::SampleRun run = grusnf::sample_test_windows(
        model->model, data->split, grusnf::resolve(cfg->map), str(mode, "mode"));
    if (diagnostics_path != nullptr && run.mode == "refined") {
      grusnf::write_text_file(diagnostics_path, grusnf::format_run_diagnostics(run));
    }
    *out = new gsnf_samples{std::move(run)};
  });
}

gsnf_status gsnf_samples_save(const gsnf_samples* samples, const char* path) {
  return guarded([&] {
    require(samples, "samples");
    grusnf::write_text_file(str(path, "path"), grusnf::format_samples_jsonl(samples->run));
  });
}

gsnf_status gsnf_samples_load(const char* path, gsnf_samples** out) {
  return guarded([&] {
    require(out, "out");
    const std::string p = str(path, "path");
    *out = new gsnf_samples{grusnf::parse_samples_jsonl(grusnf::read_text_file(p), p)};
  });
}

size_t gsnf_samples_windows(const gsnf_samples* samples) {
  return samples == nullptr ? 0 : samples->run.sets.size();
}

size_t gsnf_samples_per_window(const gsnf_samples* samples) {
  if (samples == nullptr || samples->run.sets.empty()) return 0;
  return samples->run.sets.front().count();
}

gsnf_status gsnf_samples_get(const gsnf_samples* samples, size_t window, size_t sample,
                             double* buf, size_t buf_len) {
  return guarded([&] {
    require(samples, "samples");
    require(buf, "buf");
    if (window >= samples->run.sets.size()) throw grusnf::ContractError("window out of range");
    const grusnf::SampleSet& set = samples->run.sets[window];
    if (sample >= set.count()) throw grusnf::ContractError("sample out of range");
    const auto values = set.trajectories[sample].values();
    if (buf_len < values.size()) {
      throw grusnf::ContractError("buffer holds " + std::to_string(buf_len) + " values, need " +
                                  std::to_string(values.size()));
    }
    std::copy(values.begin(), values.end(), buf);
  });
}

void gsnf_samples_destroy(gsnf_samples* samples) { delete samples; }

gsnf_status gsnf_evaluate(const gsnf_samples* plain, const gsnf_samples* refined,
                          const gsnf_dataset* data, const gsnf_config* cfg, gsnf_report** out) {
  return guarded([&] {
    require(plain, "plain samples");
    require(refined, "refined samples");
    require(data, "dataset");
    require(cfg, "config");
    require(out, "out");
    *out = new gsnf_report{
        grusnf::evaluate_runs(plain->run, refined->run, data->split, grusnf::resolve(cfg->map))};
  });
}

gsnf_status gsnf_report_save(const gsnf_report* report, const char* dir) {
  return guarded([&] {
    require(report, "report");
    grusnf::write_evaluation(report->eval, str(dir, "dir"));
  });
}

const char* gsnf_report_summary_json(const gsnf_report* report) {
  return report == nullptr ? "" : report->eval.summary_json.c_str();
}

gsnf_status gsnf_report_mean(const gsnf_report* report, const char* model, const char* metric,
                             double* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    const std::string m = str(model, "model");
    const grusnf::MetricsReport* r = nullptr;
    if (m == "plain") {
      r = &report->eval.plain;
    } else if (m == "refined") {
      r = &report->eval.refined;
    } else {
      throw grusnf::ContractError("model must be plain or refined, got '" + m + "'");
    }
    const std::string k = str(metric, "metric");
    if (k == "energy_distance") {
      *out = r->mean_energy_distance;
    } else if (k == "mae") {
      *out = r->mean_mae;
    } else if (k == "apd") {
      *out = r->mean_apd;
    } else if (k == "norm_mae") {
      *out = r->mean_norm_mae;
    } else if (k == "norm_apd") {
      *out = r->mean_norm_apd;
    } else if (k == "ratio") {
      *out = r->mean_ratio;
    } else {
      throw grusnf::ContractError("unknown metric '" + k + "'");
    }
  });
}

void gsnf_report_destroy(gsnf_report* report) { delete report; }

gsnf_status gsnf_run_compare(const gsnf_config* cfg, gsnf_report** out) {
  return guarded([&] {
    require(cfg, "config");
    grusnf::Evaluation eval = grusnf::run_compare(grusnf::resolve(cfg->map));
    if (out != nullptr) *out = new gsnf_report{std::move(eval)};
  });
}

}  // extern "C"

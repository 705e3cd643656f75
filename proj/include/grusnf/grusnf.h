/* Copyright 2026 The grusnf Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef GRUSNF_GRUSNF_H_
#define GRUSNF_GRUSNF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GSNF_API __declspec(dllexport)
#else
#define GSNF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes of the command-line tool. */
typedef enum gsnf_status {
  GSNF_OK = 0,
  GSNF_ERR_CONFIG = 2,
  GSNF_ERR_DATA = 3,
  GSNF_ERR_NUMERIC = 4,
  GSNF_ERR_IO = 5,
  GSNF_ERR_CONTRACT = 6,
  GSNF_ERR_INTERNAL = 7
} gsnf_status;

typedef struct gsnf_config gsnf_config;
typedef struct gsnf_dataset gsnf_dataset;
typedef struct gsnf_model gsnf_model;
typedef struct gsnf_samples gsnf_samples;
typedef struct gsnf_report gsnf_report;

GSNF_API const char* gsnf_version(void);

/* Message of the last failed call on this thread; "" if none. */
GSNF_API const char* gsnf_last_error(void);

/* 0 quiet, 1 progress lines on stderr (default), 2 debug. */
GSNF_API void gsnf_set_log_level(int level);

/* Configuration: key = value pairs, all keys have defaults. */
GSNF_API gsnf_status gsnf_config_create(gsnf_config** out);
GSNF_API gsnf_status gsnf_config_load(gsnf_config* cfg, const char* path);
GSNF_API gsnf_status gsnf_config_set(gsnf_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL terminated). *needed receives the full length + 1. */
GSNF_API gsnf_status gsnf_config_get(const gsnf_config* cfg, const char* key, char* buf,
                                     size_t buf_size, size_t* needed);
/* Checks that every value parses and is in range. */
GSNF_API gsnf_status gsnf_config_validate(const gsnf_config* cfg);
GSNF_API gsnf_status gsnf_config_save(const gsnf_config* cfg, const char* path);
GSNF_API void gsnf_config_destroy(gsnf_config* cfg);

/* Datasets: a directory with train.csv, val.csv, test.csv, optional
 * reference.csv and dataset.json. */
GSNF_API gsnf_status gsnf_dataset_generate(const gsnf_config* cfg, gsnf_dataset** out);
GSNF_API gsnf_status gsnf_dataset_load(const char* dir, gsnf_dataset** out);
GSNF_API gsnf_status gsnf_dataset_save(const gsnf_dataset* data, const char* dir);
/* split: "train", "val", "test" or "reference". */
GSNF_API gsnf_status gsnf_dataset_size(const gsnf_dataset* data, const char* split, size_t* count);
GSNF_API size_t gsnf_dataset_dim(const gsnf_dataset* data);
GSNF_API void gsnf_dataset_destroy(gsnf_dataset* data);

/* Models. gsnf_model_train writes the loss curve CSV to loss_csv_path when it
 * is non-NULL. On divergence it returns GSNF_ERR_NUMERIC and the model keeps
 * the last finite parameters. */
GSNF_API gsnf_status gsnf_model_create(const gsnf_config* cfg, size_t dim, gsnf_model** out);
GSNF_API gsnf_status gsnf_model_train(gsnf_model* model, const gsnf_dataset* data,
                                      const gsnf_config* cfg, const char* loss_csv_path);
GSNF_API gsnf_status gsnf_model_save(const gsnf_model* model, const char* path);
GSNF_API gsnf_status gsnf_model_load(const char* path, gsnf_model** out);
GSNF_API size_t gsnf_model_dim(const gsnf_model* model);
GSNF_API void gsnf_model_destroy(gsnf_model* model);

/* Samples every test window. mode: "plain" or "refined". For refined runs
 * the per-layer chain diagnostics are written as JSONL to diagnostics_path
 * when it is non-NULL. */
GSNF_API gsnf_status gsnf_sample(const gsnf_model* model, const gsnf_dataset* data,
                                 const gsnf_config* cfg, const char* mode,
                                 const char* diagnostics_path, gsnf_samples** out);
GSNF_API gsnf_status gsnf_samples_save(const gsnf_samples* samples, const char* path);
GSNF_API gsnf_status gsnf_samples_load(const char* path, gsnf_samples** out);
GSNF_API size_t gsnf_samples_windows(const gsnf_samples* samples);
GSNF_API size_t gsnf_samples_per_window(const gsnf_samples* samples);
/* Copies trajectory `sample` of window `window` (horizon x dim, row major). */
GSNF_API gsnf_status gsnf_samples_get(const gsnf_samples* samples, size_t window, size_t sample,
                                      double* buf, size_t buf_len);
GSNF_API void gsnf_samples_destroy(gsnf_samples* samples);

/* Metrics for a plain and a refined sample file over the same windows. */
GSNF_API gsnf_status gsnf_evaluate(const gsnf_samples* plain, const gsnf_samples* refined,
                                   const gsnf_dataset* data, const gsnf_config* cfg,
                                   gsnf_report** out);
/* Writes windows.csv, summary.json, density_plain.csv, density_refined.csv. */
GSNF_API gsnf_status gsnf_report_save(const gsnf_report* report, const char* dir);
/* Pointer valid until the report is destroyed. */
GSNF_API const char* gsnf_report_summary_json(const gsnf_report* report);
/* model: "plain" or "refined"; metric: "energy_distance", "mae", "apd",
 * "norm_mae", "norm_apd" or "ratio". */
GSNF_API gsnf_status gsnf_report_mean(const gsnf_report* report, const char* model,
                                      const char* metric, double* out);
GSNF_API void gsnf_report_destroy(gsnf_report* report);

/* Full pipeline into the configured out_dir. *out may be NULL. */
GSNF_API gsnf_status gsnf_run_compare(const gsnf_config* cfg, gsnf_report** out);

#ifdef __cplusplus
}
#endif

#endif /* GRUSNF_GRUSNF_H_ */

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grusnf/grusnf.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  gsnf_status status;
  std::string stage;
};

void check(gsnf_status s, const std::string& stage) {
  if (s != GSNF_OK) throw Failure{s, stage};
}

template <class T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using ConfigPtr = std::unique_ptr<gsnf_config, Deleter<gsnf_config, gsnf_config_destroy>>;
using DatasetPtr = std::unique_ptr<gsnf_dataset, Deleter<gsnf_dataset, gsnf_dataset_destroy>>;
using ModelPtr = std::unique_ptr<gsnf_model, Deleter<gsnf_model, gsnf_model_destroy>>;
using SamplesPtr = std::unique_ptr<gsnf_samples, Deleter<gsnf_samples, gsnf_samples_destroy>>;
using ReportPtr = std::unique_ptr<gsnf_report, Deleter<gsnf_report, gsnf_report_destroy>>;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> horizon;
  std::optional<std::string> threads;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "override a config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "root seed");
  cmd->add_option("--out-dir", o.out_dir, "run directory");
  cmd->add_option("--horizon", o.horizon, "input,output frame counts, e.g. 10,14");
  cmd->add_option("--threads", o.threads, "sampling threads");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

// Precedence: defaults < config file < --set < dedicated flags.
ConfigPtr build_config(const CommonOptions& o) {
  gsnf_set_log_level(o.quiet ? 0 : 1);
  gsnf_config* raw = nullptr;
  check(gsnf_config_create(&raw), "config");
  ConfigPtr cfg(raw);
  if (!o.config_file.empty()) check(gsnf_config_load(cfg.get(), o.config_file.c_str()), "config");
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", s.c_str());
      throw Failure{GSNF_ERR_CONFIG, "config"};
    }
    check(gsnf_config_set(cfg.get(), s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()), "config");
  }
  auto flag = [&](const std::optional<std::string>& v, const char* key) {
    if (v) check(gsnf_config_set(cfg.get(), key, v->c_str()), "config");
  };
  flag(o.seed, "seed");
  flag(o.out_dir, "out_dir");
  flag(o.horizon, "horizon");
  flag(o.threads, "threads");
  check(gsnf_config_validate(cfg.get()), "config");
  return cfg;
}

fs::path out_dir(const gsnf_config* cfg) {
  size_t needed = 0;
  check(gsnf_config_get(cfg, "out_dir", nullptr, 0, &needed), "config");
  std::string buf(needed, '\0');
  check(gsnf_config_get(cfg, "out_dir", buf.data(), buf.size(), &needed), "config");
  buf.resize(needed - 1);
  return buf;
}

void save_config(const gsnf_config* cfg, const fs::path& dir, const std::string& stage) {
  check(gsnf_config_save(cfg, (dir / "config.txt").c_str()), stage);
}

DatasetPtr load_dataset(const std::string& dir) {
  gsnf_dataset* raw = nullptr;
  check(gsnf_dataset_load(dir.c_str(), &raw), "load data");
  return DatasetPtr(raw);
}

SamplesPtr load_samples(const std::string& path) {
  gsnf_samples* raw = nullptr;
  check(gsnf_samples_load(path.c_str(), &raw), "load samples");
  return SamplesPtr(raw);
}

int cmd_gen_data(const CommonOptions& o) {
  ConfigPtr cfg = build_config(o);
  const fs::path dir = out_dir(cfg.get()) / "data";
  gsnf_dataset* raw = nullptr;
  check(gsnf_dataset_generate(cfg.get(), &raw), "gen-data");
  DatasetPtr data(raw);
  check(gsnf_dataset_save(data.get(), dir.c_str()), "gen-data");
  save_config(cfg.get(), dir, "gen-data");
  std::printf("%s\n", dir.c_str());
  return 0;
}

int cmd_train(const CommonOptions& o, std::string data_path) {
  ConfigPtr cfg = build_config(o);
  const fs::path root = out_dir(cfg.get());
  if (data_path.empty()) data_path = (root / "data").string();
  DatasetPtr data = load_dataset(data_path);
  gsnf_model* raw = nullptr;
  check(gsnf_model_create(cfg.get(), gsnf_dataset_dim(data.get()), &raw), "train");
  ModelPtr model(raw);
  const fs::path dir = root / "model";
  const fs::path ckpt = dir / "checkpoint.bin";
  const gsnf_status s =
      gsnf_model_train(model.get(), data.get(), cfg.get(), (dir / "loss.csv").c_str());
  // On divergence the model holds the last finite parameters; keep them.
  check(gsnf_model_save(model.get(), ckpt.c_str()), "train");
  save_config(cfg.get(), dir, "train");
  check(s, "train");
  std::printf("%s\n", ckpt.c_str());
  return 0;
}

int cmd_sample(const CommonOptions& o, const std::string& mode, std::string data_path,
               std::string ckpt) {
  ConfigPtr cfg = build_config(o);
  const fs::path root = out_dir(cfg.get());
  if (data_path.empty()) data_path = (root / "data").string();
  if (ckpt.empty()) ckpt = (root / "model" / "checkpoint.bin").string();
  gsnf_model* raw_model = nullptr;
  check(gsnf_model_load(ckpt.c_str(), &raw_model), "load checkpoint");
  ModelPtr model(raw_model);
  DatasetPtr data = load_dataset(data_path);
  const fs::path dir = root / "samples";
  const fs::path diag = dir / "refined_diagnostics.jsonl";
  gsnf_samples* raw = nullptr;
  fs::create_directories(dir);
  check(gsnf_sample(model.get(), data.get(), cfg.get(), mode.c_str(), diag.c_str(), &raw),
        "sample");
  SamplesPtr samples(raw);
  const fs::path out = dir / (mode + ".jsonl");
  check(gsnf_samples_save(samples.get(), out.c_str()), "sample");
  save_config(cfg.get(), dir, "sample");
  std::printf("%s\n", out.c_str());
  return 0;
}

int cmd_evaluate(const CommonOptions& o, std::string data_path, std::string plain_path,
                 std::string refined_path) {
  ConfigPtr cfg = build_config(o);
  const fs::path root = out_dir(cfg.get());
  if (data_path.empty()) data_path = (root / "data").string();
  if (plain_path.empty()) plain_path = (root / "samples" / "plain.jsonl").string();
  if (refined_path.empty()) refined_path = (root / "samples" / "refined.jsonl").string();
  DatasetPtr data = load_dataset(data_path);
  SamplesPtr plain = load_samples(plain_path);
  SamplesPtr refined = load_samples(refined_path);
  gsnf_report* raw = nullptr;
  check(gsnf_evaluate(plain.get(), refined.get(), data.get(), cfg.get(), &raw), "evaluate");
  ReportPtr report(raw);
  const fs::path dir = root / "report";
  check(gsnf_report_save(report.get(), dir.c_str()), "evaluate");
  save_config(cfg.get(), dir, "evaluate");
  std::printf("%s", gsnf_report_summary_json(report.get()));
  return 0;
}

int cmd_compare(const CommonOptions& o) {
  ConfigPtr cfg = build_config(o);
  gsnf_report* raw = nullptr;
  check(gsnf_run_compare(cfg.get(), &raw), "compare");
  ReportPtr report(raw);
  std::printf("%s", gsnf_report_summary_json(report.get()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRU-NF forecasting with Metropolis-Hastings refinement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gsnf_version());

  CommonOptions gen_opts, train_opts, sample_opts, eval_opts, compare_opts;
  std::string train_data, sample_data, sample_ckpt, sample_mode, eval_data, eval_plain,
      eval_refined;

  auto* gen = app.add_subcommand("gen-data", "write the synthetic forked dataset");
  add_common(gen, gen_opts);

  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  add_common(tr, train_opts);
  tr->add_option("--data", train_data, "dataset directory (default <out-dir>/data)");

  auto* sm = app.add_subcommand("sample", "sample every test window");
  add_common(sm, sample_opts);
  sm->add_option("--mode", sample_mode, "plain or refined")
      ->required()
      ->check(CLI::IsMember({"plain", "refined"}));
  sm->add_option("--data", sample_data, "dataset directory (default <out-dir>/data)");
  sm->add_option("--checkpoint", sample_ckpt, "checkpoint (default <out-dir>/model/checkpoint.bin)");

  auto* ev = app.add_subcommand("evaluate", "score plain and refined samples");
  add_common(ev, eval_opts);
  ev->add_option("--data", eval_data, "dataset directory (default <out-dir>/data)");
  ev->add_option("--plain", eval_plain, "plain samples (default <out-dir>/samples/plain.jsonl)");
  ev->add_option("--refined", eval_refined,
                 "refined samples (default <out-dir>/samples/refined.jsonl)");

  auto* cmp = app.add_subcommand("compare", "gen-data, train, sample both modes, evaluate");
  add_common(cmp, compare_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : GSNF_ERR_CONFIG;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_opts);
    if (tr->parsed()) return cmd_train(train_opts, train_data);
    if (sm->parsed()) return cmd_sample(sample_opts, sample_mode, sample_data, sample_ckpt);
    if (ev->parsed()) return cmd_evaluate(eval_opts, eval_data, eval_plain, eval_refined);
    if (cmp->parsed()) return cmd_compare(compare_opts);
  } catch (const Failure& f) {
    const char* msg = gsnf_last_error();
    if (*msg != '\0') std::fprintf(stderr, "error [%s]: %s\n", f.stage.c_str(), msg);
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return GSNF_ERR_IO;
  }
  return GSNF_ERR_INTERNAL;
}

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>

#include <json.hpp>

#include "errors.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "test_util.hpp"

using namespace grusnf;

namespace {

// Tiny dims, 5 epochs.
RunConfig smoke_config(const std::filesystem::path& out, std::uint64_t seed = 3) {
  ConfigMap m;
  m.set("seed", std::to_string(seed));
  m.set("out_dir", out.string());
  m.set("data.train", "60");
  m.set("data.val", "10");
  m.set("data.test", "6");
  m.set("data.reference", "20");
  m.set("model.hidden", "8");
  m.set("model.width", "8");
  m.set("model.layers", "2");
  m.set("train.epochs", "5");
  m.set("train.batch_size", "16");
  m.set("eval.samples", "20");
  m.set("eval.top_c", "5");
  return resolve(m);
}

}  // namespace

TEST_CASE("compare writes a reproducible run directory") {
  set_log_level(LogLevel::kQuiet);
  const auto root = testing::scratch_dir("compare");
  const auto start = std::chrono::steady_clock::now();
  const Evaluation a = run_compare(smoke_config(root / "a"));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
  const Evaluation b = run_compare(smoke_config(root / "b"));
  CHECK(a.summary_json == b.summary_json);

  for (const char* f : {"config.txt", "data/train.csv", "data/val.csv", "data/test.csv",
                        "data/reference.csv", "data/dataset.json", "data/config.txt",
                        "model/checkpoint.bin", "model/loss.csv", "model/config.txt",
                        "samples/plain.jsonl", "samples/refined.jsonl",
                        "samples/refined_diagnostics.jsonl", "samples/config.txt",
                        "report/windows.csv", "report/summary.json", "report/density_plain.csv",
                        "report/density_refined.csv", "report/config.txt"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(root / "a" / f));
  }
  CHECK(read_text_file(root / "a/report/summary.json") == a.summary_json);
  CHECK(read_text_file(root / "a/model/checkpoint.bin") ==
        read_text_file(root / "b/model/checkpoint.bin"));
  CHECK(read_text_file(root / "a/data/train.csv") == read_text_file(root / "b/data/train.csv"));

  // Rerunning from the persisted config gives the same report.
  ConfigMap again;
  again.merge_file(root / "a/config.txt");
  again.set("out_dir", (root / "c").string());
  CHECK(run_compare(resolve(again)).summary_json == a.summary_json);

  const auto j = nlohmann::json::parse(a.summary_json);
  CHECK(j["windows"] == 6);
  CHECK(j["samples_per_window"] == 20);
}

TEST_CASE("sample files roundtrip and evaluate identical files to zero improvement") {
  set_log_level(LogLevel::kQuiet);
  const auto root = testing::scratch_dir("samples");
  RunConfig cfg = smoke_config(root);
  cfg.train.epochs = 1;
  const DatasetSplit split = generate_dataset(cfg);
  GruNfModel model = make_model(cfg, split.dim());
  train_model(model, split, cfg);

  const SampleRun plain = sample_test_windows(model, split, cfg, "plain");
  CHECK(plain.sets.size() == 6);
  CHECK(plain.sets[0].count() == 20);
  const std::string text = format_samples_jsonl(plain);
  const SampleRun back = parse_samples_jsonl(text);
  CHECK(back.mode == "plain");
  REQUIRE(back.sets.size() == plain.sets.size());
  for (std::size_t i = 0; i < back.sets.size(); ++i) {
    CHECK(back.sets[i].window_id == plain.sets[i].window_id);
    CHECK(back.sets[i].trajectories == plain.sets[i].trajectories);
  }
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(first["window_id"] == "t0");
  CHECK(first["sample_id"] == 0);
  CHECK(first["values"].size() == 14);
  CHECK(first["values"][0].size() == 10);

  const Evaluation same = evaluate_runs(plain, plain, split, cfg);
  CHECK(same.plain.mean_ratio == same.refined.mean_ratio);
  const auto j = nlohmann::json::parse(same.summary_json);
  CHECK(j["improvement_pct"]["apd_to_mae_ratio"].get<double>() == 0.0);
  CHECK(j["improvement_pct"]["energy_distance"].get<double>() == 0.0);

  // Zero MH steps: refined values equal plain values byte for byte.
  cfg.sampler.steps = 0;
  SampleRun refined = sample_test_windows(model, split, cfg, "refined");
  refined.mode = "plain";
  CHECK(format_samples_jsonl(refined) == text);

  SampleRun missing = plain;
  missing.sets.pop_back();
  CHECK_THROWS_WITH_AS(evaluate_runs(plain, missing, split, cfg), doctest::Contains("t5"),
                       ContractError);
}

TEST_CASE("crafted samples give the hand-computed summary") {
  // Two windows, d=2, one observed and one future frame, no reference futures.
  DatasetSplit split;
  split.test = {{"a", DenseMatrix{{0, 0}, {0, 0}}}, {"b", DenseMatrix{{0, 0}, {1, 1}}}};
  ConfigMap m;
  m.set("horizon", "1,1");
  m.set("eval.samples", "2");
  m.set("eval.top_c", "2");
  const RunConfig cfg = resolve(m);
  auto run = [](const std::string& mode, std::vector<DenseMatrix> a, std::vector<DenseMatrix> b) {
    SampleRun r;
    r.mode = mode;
    for (auto [id, ts] : {std::pair{"a", a}, std::pair{"b", b}}) {
      r.sets.push_back(SampleSet{id, mode, 1, 2, ts});
    }
    return r;
  };
  // plain:   a mae 0.5 apd 2 ed 1;   b mae 0 apd 0 ed 0
  // refined: a mae .25 apd 1 ed .5;  b mae .5 apd 2 ed 1
  const SampleRun plain = run("plain", {{{1, 0}}, {{-1, 0}}}, {{{1, 1}}, {{1, 1}}});
  const SampleRun refined = run("refined", {{{0.5, 0}}, {{-0.5, 0}}}, {{{1, 2}}, {{1, 0}}});
  const Evaluation e = evaluate_runs(plain, refined, split, cfg);
  const auto j = nlohmann::json::parse(e.summary_json);
  const auto& p = j["models"]["plain"];
  const auto& r = j["models"]["refined"];
  CHECK(p["energy_distance"].get<double>() == doctest::Approx(0.5));
  CHECK(p["mae"].get<double>() == doctest::Approx(0.25));
  CHECK(p["apd"].get<double>() == doctest::Approx(1.0));
  CHECK(r["energy_distance"].get<double>() == doctest::Approx(0.75));
  CHECK(r["mae"].get<double>() == doctest::Approx(0.375));
  CHECK(r["apd"].get<double>() == doctest::Approx(1.5));
  // Pooled ranges MAE [0, 0.5], APD [0, 2]: plain ratios {1, 0}, refined {1, 1}.
  CHECK(p["norm_mae"].get<double>() == doctest::Approx(0.5));
  CHECK(p["apd_to_mae_ratio"].get<double>() == doctest::Approx(0.5));
  CHECK(r["norm_mae"].get<double>() == doctest::Approx(0.75));
  CHECK(r["norm_apd"].get<double>() == doctest::Approx(0.75));
  CHECK(r["apd_to_mae_ratio"].get<double>() == doctest::Approx(1.0));
  CHECK(j["improvement_pct"]["apd_to_mae_ratio"].get<double>() == doctest::Approx(100.0));
  CHECK(j["improvement_pct"]["energy_distance"].get<double>() == doctest::Approx(-50.0));
  CHECK(j["windows"] == 2);
}

TEST_CASE("model and dataset dimensions must agree") {
  set_log_level(LogLevel::kQuiet);
  RunConfig cfg = smoke_config(testing::scratch_dir("dims"));
  const DatasetSplit split = generate_dataset(cfg);
  const GruNfModel model = make_model(cfg, 20);
  CHECK_THROWS_AS(sample_test_windows(model, split, cfg, "plain"), ConfigError);
  CHECK_THROWS_AS(sample_test_windows(make_model(cfg, 10), split, cfg, "fancy"), ConfigError);
}

TEST_CASE("malformed sample files") {
  CHECK_THROWS_WITH_AS(parse_samples_jsonl("{\"window_id\":\"a\"}\n", "s.jsonl"),
                       doctest::Contains("s.jsonl:1:"), FormatError);
  CHECK_THROWS_AS(parse_samples_jsonl("not json\n"), FormatError);
  CHECK_THROWS_AS(parse_samples_jsonl(""), FormatError);
  const std::string two =
      "{\"window_id\":\"a\",\"sample_id\":0,\"model\":\"plain\",\"values\":[[1,2]]}\n"
      "{\"window_id\":\"a\",\"sample_id\":1,\"model\":\"plain\",\"values\":[[1,2,3]]}\n";
  CHECK_THROWS_WITH_AS(parse_samples_jsonl(two, "s.jsonl"), doctest::Contains("s.jsonl:2:"),
                       FormatError);
}

TEST_CASE("stage failures name the stage") {
  set_log_level(LogLevel::kQuiet);
  const auto root = testing::scratch_dir("stage");
  // A regular file where the data directory should go.
  write_text_file(root / "data", "x");
  try {
    run_compare(smoke_config(root));
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("gen-data:", 0) == 0);
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

namespace {

double dist2(const DenseMatrix& a, const DenseMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Two-means on flattened reference futures, seeded with the farthest pair.
std::vector<DenseMatrix> mode_centroids(const std::vector<DenseMatrix>& refs) {
  auto farthest = [&](const DenseMatrix& from) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
      if (dist2(refs[i], from) > dist2(refs[best], from)) best = i;
    }
    return refs[best];
  };
  std::vector<DenseMatrix> c{farthest(refs[0])};
  c.push_back(farthest(c[0]));
  for (int iter = 0; iter < 10; ++iter) {
    std::vector<DenseMatrix> sum(2, DenseMatrix(refs[0].rows(), refs[0].cols()));
    std::vector<double> n(2, 0.0);
    for (const auto& r : refs) {
      const std::size_t k = dist2(r, c[0]) <= dist2(r, c[1]) ? 0 : 1;
      for (std::size_t i = 0; i < r.size(); ++i) sum[k][i] += r[i];
      n[k] += 1.0;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t i = 0; i < sum[k].size(); ++i) c[k][i] = sum[k][i] / n[k];
    }
  }
  return c;
}

// Windows where each mode receives at least 10% of the samples.
std::size_t covered_windows(const SampleRun& run, const DatasetSplit& split, const RunConfig& cfg) {
  std::size_t covered = 0;
  for (const auto& set : run.sets) {
    std::vector<DenseMatrix> refs;
    for (const auto* r : split.references_for(set.window_id)) {
      refs.push_back(window_split(*r, cfg.input_frames, cfg.output_frames).second);
    }
    const auto c = mode_centroids(refs);
    std::size_t first = 0;
    for (const auto& t : set.trajectories) {
      first += dist2(t, c[0]) <= dist2(t, c[1]) ? 1 : 0;
    }
    const double frac = static_cast<double>(first) / static_cast<double>(set.count());
    if (std::min(frac, 1.0 - frac) >= 0.1) ++covered;
  }
  return covered;
}

}  // namespace

TEST_CASE("refinement covers both modes in more seeds than plain sampling") {
  set_log_level(LogLevel::kQuiet);
  int plain_seeds = 0, refined_seeds = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    ConfigMap m;
    m.set("seed", std::to_string(seed));
    m.set("data.test", "30");
    m.set("train.epochs", "10");
    const RunConfig cfg = resolve(m);
    const DatasetSplit split = generate_dataset(cfg);
    GruNfModel model = make_model(cfg, split.dim());
    train_model(model, split, cfg);
    const std::size_t p = covered_windows(sample_test_windows(model, split, cfg, "plain"), split, cfg);
    const std::size_t r =
        covered_windows(sample_test_windows(model, split, cfg, "refined"), split, cfg);
    MESSAGE("seed " << seed << ": both modes covered in " << p << "/30 plain, " << r
                    << "/30 refined windows");
    // A seed covers both modes when a majority of its windows do.
    plain_seeds += p > 15 ? 1 : 0;
    refined_seeds += r > 15 ? 1 : 0;
  }
  CHECK(refined_seeds == 3);
  CHECK(plain_seeds < refined_seeds);
}

TEST_CASE("trained model spreads its samples at every step") {
  set_log_level(LogLevel::kQuiet);
  RunConfig cfg = smoke_config(testing::scratch_dir("spread"));
  cfg.input_frames = 8;
  cfg.output_frames = 16;
  cfg.data.prefix = 8;
  cfg.data.suffix = 16;
  cfg.samples = 100;
  cfg.top_c = 20;
  const DatasetSplit split = generate_dataset(cfg);
  GruNfModel model = make_model(cfg, split.dim());
  train_model(model, split, cfg);
  for (const auto& set : sample_test_windows(model, split, cfg, "plain").sets) {
    CHECK(set.count() == 100);
    CHECK(set.horizon == 16);
    for (std::size_t t = 0; t < set.horizon; ++t) {
      std::vector<DenseMatrix> step;
      for (const auto& traj : set.trajectories) step.push_back(DenseMatrix::row(traj.row_span(t)));
      CHECK(apd(step) > 0.0);
    }
  }
}

TEST_CASE("smoothed validation NLL decreases over 200 epochs") {
  set_log_level(LogLevel::kQuiet);
  ConfigMap m;
  m.set("seed", "7");
  m.set("data.train", "200");
  m.set("data.val", "50");
  m.set("data.test", "2");
  m.set("data.reference", "2");
  m.set("model.hidden", "16");
  m.set("model.width", "16");
  m.set("model.layers", "2");
  m.set("train.epochs", "200");
  const RunConfig cfg = resolve(m);
  const DatasetSplit split = generate_dataset(cfg);
  GruNfModel model = make_model(cfg, split.dim());
  const TrainResult r = train_model(model, split, cfg);
  REQUIRE(r.curve.size() == 200);
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 10 <= r.curve.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) s += r.curve[j].val_nll;
    smooth.push_back(s / 10.0);
  }
  std::size_t rises = 0;
  for (std::size_t i = 1; i < smooth.size(); ++i) rises += smooth[i] > smooth[i - 1] ? 1 : 0;
  MESSAGE("val NLL " << r.curve.front().val_nll << " -> " << r.curve.back().val_nll << ", " << rises
                     << " rises in the smoothed curve");
  CHECK(rises == 0);
}

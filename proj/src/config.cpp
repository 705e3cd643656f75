// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "io.hpp"

namespace grusnf {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t as_u64(const ConfigMap& m, const std::string& key) {
  return parse_u64(m.get(key), key);
}

std::size_t as_count(const ConfigMap& m, const std::string& key, std::size_t min = 0) {
  const auto v = as_u64(m, key);
  if (v < min) throw ConfigError(key + " must be at least " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

double as_double(const ConfigMap& m, const std::string& key) {
  const std::string& v = m.get(key);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& ConfigMap::defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      {"seed", "0"},
      {"out_dir", "runs/default"},
      {"threads", "1"},
      {"horizon", "10,14"},
      {"data.train", "1000"},
      {"data.val", "100"},
      {"data.test", "100"},
      {"data.keypoints", "5"},
      {"data.modes", "2"},
      {"data.noise_std", "0.02"},
      {"data.mode_angle_deg", "35"},
      {"data.reference", "100"},
      {"model.hidden", "64"},
      {"model.layers", "4"},
      {"model.width", "64"},
      {"model.scale_cap", "2"},
      {"train.epochs", "30"},
      {"train.batch_size", "32"},
      {"train.learning_rate", "0.001"},
      {"train.beta", "0.5"},
      {"train.clip_norm", "5"},
      {"sampler.steps", "2"},
      {"sampler.proposal_std", "0.03"},
      {"sampler.anchor", "readout"},
      {"sampler.target_energy", "l2"},
      {"sampler.lambda_order", "traversal"},
      {"eval.samples", "100"},
      {"eval.top_c", "20"},
      {"eval.density_points", "200"},
      {"eval.mae_floor", "0.01"},
      {"eval.energy_distance", "flattened"},
      {"eval.reference", "family"},
  };
  return kDefaults;
}

ConfigMap::ConfigMap() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

bool ConfigMap::known(const std::string& key) const { return values_.count(key) != 0; }

void ConfigMap::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  it->second = value;
}

const std::string& ConfigMap::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

void ConfigMap::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!known(key)) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    set(key, value);
  }
}

void ConfigMap::merge_file(const std::filesystem::path& path) {
  merge_text(read_text_file(path), path.string());
}

void ConfigMap::merge_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(std::string_view(assignment).substr(0, eq)),
      trim(std::string_view(assignment).substr(eq + 1)));
}

std::string ConfigMap::render() const {
  std::string out = "# grusnf resolved configuration\n";
  for (const auto& [k, _] : defaults()) out += k + " = " + values_.at(k) + "\n";
  return out;
}

RunConfig resolve(const ConfigMap& m) {
  RunConfig c;
  c.seed = as_u64(m, "seed");
  c.out_dir = m.get("out_dir");
  if (c.out_dir.empty()) throw ConfigError("out_dir must not be empty");
  c.threads = as_count(m, "threads", 1);

  {
    const std::string& h = m.get("horizon");
    const auto comma = h.find(',');
    if (comma == std::string::npos) throw ConfigError("horizon must be 'M,N', got '" + h + "'");
    c.input_frames = parse_u64(trim(std::string_view(h).substr(0, comma)), "horizon M");
    c.output_frames = parse_u64(trim(std::string_view(h).substr(comma + 1)), "horizon N");
    if (c.input_frames == 0 || c.output_frames == 0) throw ConfigError("horizon M and N must be >= 1");
  }

  ForkedSpec& d = c.data;
  d.train = as_count(m, "data.train", 1);
  d.val = as_count(m, "data.val");
  d.test = as_count(m, "data.test", 1);
  d.keypoints = as_count(m, "data.keypoints", 1);
  d.modes = as_count(m, "data.modes", 2);
  d.noise_std = as_double(m, "data.noise_std");
  if (d.noise_std < 0.0) throw ConfigError("data.noise_std must be >= 0");
  d.mode_angle_deg = as_double(m, "data.mode_angle_deg");
  d.reference = as_count(m, "data.reference");
  d.prefix = c.input_frames;
  d.suffix = c.output_frames;
  d.seed = derive_seed(c.seed, "data");

  c.dims.dim = 2 * d.keypoints;
  c.dims.hidden = as_count(m, "model.hidden", 1);
  c.dims.layers = as_count(m, "model.layers", 2);
  c.dims.width = as_count(m, "model.width", 1);
  c.dims.scale_cap = as_double(m, "model.scale_cap");
  if (!(c.dims.scale_cap > 0.0)) throw ConfigError("model.scale_cap must be positive");

  TrainConfig& t = c.train;
  t.epochs = as_count(m, "train.epochs");
  t.batch_size = as_count(m, "train.batch_size", 1);
  t.learning_rate = as_double(m, "train.learning_rate");
  t.beta = as_double(m, "train.beta");
  t.clip_norm = as_double(m, "train.clip_norm");
  t.seed = derive_seed(c.seed, "train");
  validate_train_config(t);

  SamplerConfig& s = c.sampler;
  s.steps = as_count(m, "sampler.steps");
  s.proposal_std = as_double(m, "sampler.proposal_std");
  s.seed = derive_seed(c.seed, "sampling");
  const std::string& anchor = m.get("sampler.anchor");
  if (anchor == "readout") s.anchor = AnchorMode::kReadout;
  else if (anchor == "flow_at_prior_mean") s.anchor = AnchorMode::kFlowAtPriorMean;
  else throw ConfigError("sampler.anchor must be readout or flow_at_prior_mean");
  const std::string& target = m.get("sampler.target_energy");
  if (target == "l2") s.target = TargetEnergy::kL2;
  else if (target == "l2sq") s.target = TargetEnergy::kL2Squared;
  else throw ConfigError("sampler.target_energy must be l2 or l2sq");
  const std::string& order = m.get("sampler.lambda_order");
  if (order == "traversal") s.lambda_order = LambdaOrder::kTraversal;
  else if (order == "forward") s.lambda_order = LambdaOrder::kForwardIndex;
  else throw ConfigError("sampler.lambda_order must be traversal or forward");
  validate_sampler_config(s);

  c.samples = as_count(m, "eval.samples", 1);
  c.top_c = as_count(m, "eval.top_c", 1);
  if (c.top_c > c.samples) throw ConfigError("eval.top_c must not exceed eval.samples");
  c.density_points = as_count(m, "eval.density_points", 2);
  c.mae_floor = as_double(m, "eval.mae_floor");
  if (!(c.mae_floor >= 1e-6 && c.mae_floor <= 1.0)) {
    throw ConfigError("eval.mae_floor must lie in [1e-6, 1]");
  }
  const std::string& ed = m.get("eval.energy_distance");
  if (ed == "flattened") c.ed_mode = EnergyDistanceMode::kFlattened;
  else if (ed == "per_timestep") c.ed_mode = EnergyDistanceMode::kPerTimestep;
  else throw ConfigError("eval.energy_distance must be flattened or per_timestep");
  const std::string& ref = m.get("eval.reference");
  if (ref == "family") c.family_reference = true;
  else if (ref == "single") c.family_reference = false;
  else throw ConfigError("eval.reference must be family or single");

  c.rendered = m.render();
  return c;
}

}  // namespace grusnf

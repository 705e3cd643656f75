// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "data.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "sampler.hpp"

namespace grusnf {

/// Flat key-value configuration. Every known key is always present with
/// either its default or an override, so the rendered form is the fully
/// resolved configuration.
class ConfigMap {
 public:
  ConfigMap();

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool known(const std::string& key) const;

  /// Parses `key = value` lines; '#' starts a comment.
  void merge_text(const std::string& text, const std::string& source = "<config>");
  void merge_file(const std::filesystem::path& path);
  /// `key=value`
  void merge_assignment(const std::string& assignment);

  std::string render() const;
  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::size_t threads = 1;
  std::size_t input_frames = 10;   // M
  std::size_t output_frames = 14;  // N
  ForkedSpec data;
  ModelDims dims;
  TrainConfig train;
  SamplerConfig sampler;
  std::size_t samples = 100;  // D
  std::size_t top_c = 20;     // C
  std::size_t density_points = 200;
  double mae_floor = 0.01;
  EnergyDistanceMode ed_mode = EnergyDistanceMode::kFlattened;
  bool family_reference = true;
  std::string rendered;  // resolved key-value text
};

/// Validates and converts. Named substreams of `seed` drive data generation,
/// initialization, shuffling and sampling.
RunConfig resolve(const ConfigMap& map);

}  // namespace grusnf

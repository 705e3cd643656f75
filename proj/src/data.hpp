// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace grusnf {

/// T x d keypoint coordinates (d = 2K, x/y interleaved per keypoint).
struct KeypointSequence {
  std::string id;
  DenseMatrix frames;

  std::size_t length() const noexcept { return frames.rows(); }
  std::size_t dim() const noexcept { return frames.cols(); }
  friend bool operator==(const KeypointSequence&, const KeypointSequence&) = default;
};

/// Throws ContractError unless T >= 2, d is even and positive, values finite.
void validate_sequence(const KeypointSequence& seq);

struct ForkedSpec {
  std::size_t train = 1000;
  std::size_t val = 100;
  std::size_t test = 100;
  std::size_t keypoints = 5;
  std::size_t prefix = 10;  // M: frame index where the modes branch
  std::size_t suffix = 14;  // N
  std::size_t modes = 2;
  double noise_std = 0.02;
  double mode_angle_deg = 35.0;
  std::size_t reference = 100;  // sampled futures per test sequence
  std::uint64_t seed = 0;

  std::size_t length() const noexcept { return prefix + suffix; }
  std::size_t dim() const noexcept { return 2 * keypoints; }
};

/// Noise-free parameters shared by every member of a prefix family.
struct ForkedFamily {
  double cx = 0.0, cy = 0.0;  // start of the centre track
  double vx = 0.0, vy = 0.0;  // per-frame centre velocity before the branch
  double ring_phase = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;
  std::vector<double> phases;  // one per keypoint
};

ForkedFamily draw_family(const ForkedSpec& spec, Rng& rng);
/// Branch angle (radians) of `mode`, evenly spread over ±mode_angle_deg.
double mode_angle(const ForkedSpec& spec, std::size_t mode);
/// Frames 0..M-1 follow the family's prefix dynamic, frames M.. use the
/// mode-rotated velocity. Noise is skipped for frames before `noise_from`.
DenseMatrix render_forked(const ForkedSpec& spec, const ForkedFamily& family, std::size_t mode,
                          double noise_std, Rng& rng, std::size_t noise_from = 0);
/// Rounds to 9 significant digits, the precision of the CSV format.
double quantize(double v);

struct DatasetSplit {
  std::vector<KeypointSequence> train;
  std::vector<KeypointSequence> val;
  std::vector<KeypointSequence> test;
  /// Extra futures for each test sequence, id "<test id>/<r>", sharing the
  /// observed prefix. Empty for ingested data.
  std::vector<KeypointSequence> reference;
  /// JSON sidecar text (generator, params, seed).
  std::string sidecar;

  std::size_t dim() const;
  std::vector<const KeypointSequence*> references_for(const std::string& test_id) const;
};

DatasetSplit gen_forked(const ForkedSpec& spec);
std::string forked_sidecar(const ForkedSpec& spec);

/// CSV: header `seq_id,frame,kp0_x,kp0_y,...`, frames contiguous and
/// ascending from 0 per sequence, values with 9 significant digits.
std::vector<KeypointSequence> read_keypoints_csv(const std::filesystem::path& path,
                                                 std::optional<std::size_t> expected_dim = {});
std::vector<KeypointSequence> parse_keypoints_csv(const std::string& text,
                                                  const std::string& source = "<memory>",
                                                  std::optional<std::size_t> expected_dim = {});
void write_keypoints_csv(const std::vector<KeypointSequence>& seqs,
                         const std::filesystem::path& path);
std::string format_keypoints_csv(const std::vector<KeypointSequence>& seqs);

/// train.csv, val.csv, test.csv, optional reference.csv and dataset.json.
DatasetSplit load_split(const std::filesystem::path& dir);
void save_split(const DatasetSplit& split, const std::filesystem::path& dir);

/// First M frames as the conditioning window, the next N as ground truth.
std::pair<DenseMatrix, DenseMatrix> window_split(const KeypointSequence& seq, std::size_t m,
                                                 std::size_t n);

}  // namespace grusnf

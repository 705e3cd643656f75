// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "data.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "errors.hpp"
#include "io.hpp"

namespace grusnf {
namespace {

constexpr double kRingRadius = 0.2;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string coord_name(std::size_t col) {
  return "kp" + std::to_string(col / 2) + (col % 2 == 0 ? "_x" : "_y");
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + msg, line);
}

}  // namespace

void validate_sequence(const KeypointSequence& seq) {
  if (seq.length() < 2) throw ContractError("sequence " + seq.id + " has fewer than 2 frames");
  if (seq.dim() == 0 || seq.dim() % 2 != 0) {
    throw ContractError("sequence " + seq.id + " has odd or zero coordinate count");
  }
  if (!seq.frames.all_finite()) throw ContractError("sequence " + seq.id + " has non-finite values");
}

double quantize(double v) {
  return std::strtod(format_double(v, 9).c_str(), nullptr);
}

ForkedFamily draw_family(const ForkedSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  ForkedFamily f;
  f.cx = uniform(-0.3, 0.3);
  f.cy = uniform(-0.3, 0.3);
  const double speed = uniform(0.012, 0.025);
  const double heading = uniform(0.0, 2.0 * std::numbers::pi);
  f.vx = speed * std::cos(heading);
  f.vy = speed * std::sin(heading);
  f.ring_phase = uniform(0.0, 2.0 * std::numbers::pi);
  f.amplitude = uniform(0.02, 0.06);
  f.frequency = uniform(0.3, 0.6);
  f.phases.resize(spec.keypoints);
  for (double& p : f.phases) p = uniform(0.0, 2.0 * std::numbers::pi);
  return f;
}

double mode_angle(const ForkedSpec& spec, std::size_t mode) {
  const double span = spec.mode_angle_deg * std::numbers::pi / 180.0;
  if (spec.modes < 2) return 0.0;
  return -span + 2.0 * span * static_cast<double>(mode) / static_cast<double>(spec.modes - 1);
}

DenseMatrix render_forked(const ForkedSpec& spec, const ForkedFamily& family, std::size_t mode,
                          double noise_std, Rng& rng, std::size_t noise_from) {
  const std::size_t length = spec.length();
  const std::size_t k_count = spec.keypoints;
  const double angle = mode_angle(spec, mode);
  const double bx = std::cos(angle) * family.vx - std::sin(angle) * family.vy;
  const double by = std::sin(angle) * family.vx + std::cos(angle) * family.vy;
  std::normal_distribution<double> noise(0.0, 1.0);
  DenseMatrix frames(length, 2 * k_count);
  for (std::size_t t = 0; t < length; ++t) {
    double cx, cy;
    const double tt = static_cast<double>(t);
    if (t < spec.prefix) {
      cx = family.cx + family.vx * tt;
      cy = family.cy + family.vy * tt;
    } else {
      const double pre = static_cast<double>(spec.prefix) - 1.0;
      const double post = tt - pre;
      cx = family.cx + family.vx * pre + bx * post;
      cy = family.cy + family.vy * pre + by * post;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      const double theta =
          family.ring_phase + 2.0 * std::numbers::pi * static_cast<double>(k) /
                                  static_cast<double>(k_count);
      const double radius =
          kRingRadius + family.amplitude * std::sin(family.frequency * tt + family.phases[k]);
      double x = cx + radius * std::cos(theta);
      double y = cy + radius * std::sin(theta);
      if (t >= noise_from && noise_std > 0.0) {
        x += noise_std * noise(rng);
        y += noise_std * noise(rng);
      }
      frames(t, 2 * k) = quantize(x);
      frames(t, 2 * k + 1) = quantize(y);
    }
  }
  return frames;
}

std::size_t DatasetSplit::dim() const {
  for (const auto* part : {&train, &val, &test}) {
    if (!part->empty()) return part->front().dim();
  }
  return 0;
}

std::vector<const KeypointSequence*> DatasetSplit::references_for(
    const std::string& test_id) const {
  std::vector<const KeypointSequence*> out;
  const std::string prefix = test_id + "/";
  for (const auto& r : reference) {
    if (r.id.compare(0, prefix.size(), prefix) == 0) out.push_back(&r);
  }
  return out;
}

std::string forked_sidecar(const ForkedSpec& spec) {
  nlohmann::ordered_json j;
  j["generator"] = "forked";
  j["params"] = {{"train", spec.train},
                 {"val", spec.val},
                 {"test", spec.test},
                 {"keypoints", spec.keypoints},
                 {"prefix", spec.prefix},
                 {"suffix", spec.suffix},
                 {"modes", spec.modes},
                 {"noise_std", spec.noise_std},
                 {"mode_angle_deg", spec.mode_angle_deg},
                 {"reference", spec.reference}};
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

DatasetSplit gen_forked(const ForkedSpec& spec) {
  if (spec.modes < 2) throw ContractError("gen_forked: modes must be at least 2");
  if (spec.keypoints == 0 || spec.prefix == 0 || spec.suffix == 0 || spec.train == 0) {
    throw ContractError("gen_forked: keypoints, prefix, suffix and train count must be positive");
  }
  if (spec.prefix + spec.suffix < 2) throw ContractError("gen_forked: sequences need 2 frames");
  if (!(spec.noise_std >= 0.0)) throw ContractError("gen_forked: noise_std must be >= 0");

  DatasetSplit split;
  std::uniform_int_distribution<std::size_t> pick_mode(0, spec.modes - 1);
  auto make = [&](const char* tag, std::size_t count, std::vector<KeypointSequence>& out,
                  bool with_reference) {
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng = make_stream(spec.seed, std::string("data/") + tag, {i});
      const ForkedFamily family = draw_family(spec, rng);
      const std::size_t mode = pick_mode(rng);
      KeypointSequence seq{std::string(tag) + std::to_string(i),
                           render_forked(spec, family, mode, spec.noise_std, rng)};
      if (with_reference) {
        for (std::size_t r = 0; r < spec.reference; ++r) {
          const std::size_t alt = pick_mode(rng);
          DenseMatrix future =
              render_forked(spec, family, alt, spec.noise_std, rng, spec.prefix);
          for (std::size_t t = 0; t < spec.prefix; ++t) {
            for (std::size_t c = 0; c < seq.dim(); ++c) future(t, c) = seq.frames(t, c);
          }
          split.reference.push_back({seq.id + "/" + std::to_string(r), std::move(future)});
        }
      }
      out.push_back(std::move(seq));
    }
  };
  make("s", spec.train, split.train, false);
  make("v", spec.val, split.val, false);
  make("t", spec.test, split.test, true);
  split.sidecar = forked_sidecar(spec);
  return split;
}

std::vector<KeypointSequence> parse_keypoints_csv(const std::string& text,
                                                  const std::string& source,
                                                  std::optional<std::size_t> expected_dim) {
  std::vector<KeypointSequence> seqs;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::size_t columns = 0;
  std::vector<double> current;
  std::size_t current_start = 0;
  std::size_t last_frame = 0;
  std::unordered_set<std::string> seen;

  auto finish = [&]() {
    if (seqs.empty() || current.empty()) return;
    const std::size_t rows = current.size() / dim;
    if (rows < 2) fail(source, current_start, "sequence " + seqs.back().id + " has fewer than 2 frames");
    seqs.back().frames = DenseMatrix(rows, dim, std::move(current));
    current.clear();
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      const auto fields = split_fields(line);
      if (fields.size() < 2 || fields[0] != "seq_id" || fields[1] != "frame") {
        fail(source, 1, "malformed header: expected 'seq_id,frame,kp0_x,kp0_y,...'");
      }
      const std::size_t coords = fields.size() - 2;
      if (coords == 0 || coords % 2 != 0) {
        fail(source, 1, "dimension error: header declares " + std::to_string(coords) +
                            " coordinate columns, expected a positive even count");
      }
      for (std::size_t c = 0; c < coords; ++c) {
        if (fields[c + 2] != coord_name(c)) {
          fail(source, 1, "malformed header: column " + std::to_string(c + 3) + " is '" +
                              std::string(fields[c + 2]) + "', expected '" + coord_name(c) + "'");
        }
      }
      dim = coords;
      columns = fields.size();
      if (expected_dim && *expected_dim != dim) {
        fail(source, 1, "dimension error: file has d=" + std::to_string(dim) + ", expected d=" +
                            std::to_string(*expected_dim));
      }
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns) {
      fail(source, line_no, "ragged row: expected " + std::to_string(columns) + " fields, got " +
                                std::to_string(fields.size()));
    }
    const std::string id(fields[0]);
    if (id.empty()) fail(source, line_no, "empty seq_id");
    std::size_t frame = 0;
    {
      const auto f = fields[1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), frame);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        fail(source, line_no, "invalid frame index '" + std::string(f) + "'");
      }
    }
    if (seqs.empty() || seqs.back().id != id) {
      finish();
      if (!seen.insert(id).second) {
        fail(source, line_no, "sequence " + id + " is not contiguous");
      }
      if (frame != 0) fail(source, line_no, "sequence " + id + " does not start at frame 0");
      seqs.push_back({id, {}});
      current_start = line_no;
    } else if (frame != last_frame + 1) {
      fail(source, line_no, "frame " + std::to_string(frame) + " of sequence " + id +
                                " is not ascending and contiguous");
    }
    last_frame = frame;
    for (std::size_t c = 0; c < dim; ++c) {
      const auto f = fields[c + 2];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        fail(source, line_no, "invalid number '" + std::string(f) + "' in column " + coord_name(c));
      }
      if (!std::isfinite(v)) {
        fail(source, line_no, "non-finite value in column " + coord_name(c));
      }
      current.push_back(v);
    }
  }
  if (line_no == 0) fail(source, 1, "malformed header: file is empty");
  finish();
  return seqs;
}

std::vector<KeypointSequence> read_keypoints_csv(const std::filesystem::path& path,
                                                 std::optional<std::size_t> expected_dim) {
  return parse_keypoints_csv(read_text_file(path), path.string(), expected_dim);
}

std::string format_keypoints_csv(const std::vector<KeypointSequence>& seqs) {
  if (seqs.empty()) throw ContractError("cannot write an empty keypoint file");
  const std::size_t dim = seqs.front().dim();
  std::string out = "seq_id,frame";
  for (std::size_t c = 0; c < dim; ++c) out += "," + coord_name(c);
  out += "\n";
  for (const auto& seq : seqs) {
    validate_sequence(seq);
    if (seq.dim() != dim) throw ContractError("sequences disagree on dimension");
    if (seq.id.find(',') != std::string::npos || seq.id.empty()) {
      throw ContractError("sequence id '" + seq.id + "' cannot be written to CSV");
    }
    for (std::size_t t = 0; t < seq.length(); ++t) {
      out += seq.id;
      out += ',';
      out += std::to_string(t);
      for (double v : seq.frames.row_span(t)) {
        out += ',';
        out += format_double(v, 9);
      }
      out += '\n';
    }
  }
  return out;
}

void write_keypoints_csv(const std::vector<KeypointSequence>& seqs,
                         const std::filesystem::path& path) {
  write_text_file(path, format_keypoints_csv(seqs));
}

DatasetSplit load_split(const std::filesystem::path& dir) {
  DatasetSplit split;
  split.train = read_keypoints_csv(dir / "train.csv");
  const std::size_t dim = split.dim();
  split.val = read_keypoints_csv(dir / "val.csv", dim);
  split.test = read_keypoints_csv(dir / "test.csv", dim);
  if (std::filesystem::exists(dir / "reference.csv")) {
    split.reference = read_keypoints_csv(dir / "reference.csv", dim);
  }
  if (std::filesystem::exists(dir / "dataset.json")) {
    split.sidecar = read_text_file(dir / "dataset.json");
  }
  std::unordered_set<std::string> ids;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (const auto& s : *part) {
      if (!ids.insert(s.id).second) {
        throw FormatError("sequence id " + s.id + " appears in more than one split file");
      }
    }
  }
  return split;
}

void save_split(const DatasetSplit& split, const std::filesystem::path& dir) {
  write_keypoints_csv(split.train, dir / "train.csv");
  write_keypoints_csv(split.val, dir / "val.csv");
  write_keypoints_csv(split.test, dir / "test.csv");
  if (!split.reference.empty()) write_keypoints_csv(split.reference, dir / "reference.csv");
  if (!split.sidecar.empty()) write_text_file(dir / "dataset.json", split.sidecar);
}

std::pair<DenseMatrix, DenseMatrix> window_split(const KeypointSequence& seq, std::size_t m,
                                                 std::size_t n) {
  if (m == 0 || n == 0) throw ContractError("window_split: M and N must be positive");
  if (seq.length() < m + n) {
    throw ContractError("window_split: sequence " + seq.id + " has " +
                        std::to_string(seq.length()) + " frames, need M+N=" +
                        std::to_string(m + n));
  }
  const std::size_t d = seq.dim();
  DenseMatrix window(m, d), truth(n, d);
  for (std::size_t t = 0; t < m; ++t)
    for (std::size_t c = 0; c < d; ++c) window(t, c) = seq.frames(t, c);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c) truth(t, c) = seq.frames(m + t, c);
  return {std::move(window), std::move(truth)};
}

}  // namespace grusnf

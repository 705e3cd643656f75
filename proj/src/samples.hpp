// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace grusnf {

/// D sampled futures (each N x d) for one conditioning window.
struct SampleSet {
  std::string window_id;
  std::string model_tag;  // "plain" or "refined"
  std::size_t horizon = 0;
  std::size_t dim = 0;
  std::vector<DenseMatrix> trajectories;

  std::size_t count() const noexcept { return trajectories.size(); }
  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

/// Throws ContractError unless D >= 1 and every trajectory is horizon x dim.
void validate_sample_set(const SampleSet& set);

}  // namespace grusnf

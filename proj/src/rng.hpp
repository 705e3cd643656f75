// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace grusnf {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}
}  // namespace detail

/// Seed for the named substream `name` of `root`, further keyed by ids
/// (window index, trajectory index, ...). Pure function of its arguments.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                                    std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t h = detail::splitmix(root ^ detail::fnv1a(name));
  for (std::uint64_t id : ids) h = detail::splitmix(h ^ detail::splitmix(id + 1));
  return h;
}

inline Rng make_stream(std::uint64_t root, std::string_view name,
                       std::initializer_list<std::uint64_t> ids = {}) {
  return Rng(derive_seed(root, name, ids));
}

}  // namespace grusnf

// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

namespace grusnf {

std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
void ensure_directory(const std::filesystem::path& dir);

/// printf-style "%.*g".
std::string format_double(double v, int significant_digits);

}  // namespace grusnf

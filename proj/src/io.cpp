// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "errors.hpp"

namespace grusnf {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

void ensure_directory(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  ensure_directory(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_double(double v, int significant_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, v);
  return buf;
}

}  // namespace grusnf

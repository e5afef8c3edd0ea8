// Copyright 2026  The eowsed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "eowsed/common.hpp"

namespace eowsed::detail {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeAbort("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeAbort("cannot open for reading: " + path);
  return in;
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("truncated binary data while reading " + what);
  return value;
}

inline void put_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_doubles(std::istream& in, double* data, std::size_t n, const std::string& what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ValidationError("truncated binary data while reading " + what);
}

}  // namespace eowsed::detail

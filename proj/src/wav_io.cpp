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

#include <cmath>
#include <cstring>
#include <vector>

#include "binary_io.hpp"
#include "eowsed/features.hpp"

namespace eowsed {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string read_tag(std::istream& in, const std::string& path) {
  char tag[4];
  in.read(tag, 4);
  if (!in) throw ValidationError("truncated WAV header: " + path);
  return std::string(tag, 4);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  auto in = detail::open_in(path);
  if (read_tag(in, path) != "RIFF") fail("not a RIFF file: " + path);
  detail::get<std::uint32_t>(in, "RIFF size");
  if (read_tag(in, path) != "WAVE") fail("not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  for (;;) {
    const std::string id = read_tag(in, path);
    const auto size = detail::get<std::uint32_t>(in, "chunk size");
    if (id == "fmt ") {
      std::vector<char> body(size);
      in.read(body.data(), size);
      if (!in || size < 16) fail("bad fmt chunk: " + path);
      std::memcpy(&format, body.data(), 2);
      std::memcpy(&channels, body.data() + 2, 2);
      std::memcpy(&rate, body.data() + 4, 4);
      std::memcpy(&bits, body.data() + 14, 2);
      if (format == kFormatExtensible && size >= 26) std::memcpy(&format, body.data() + 24, 2);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail("data chunk before fmt chunk: " + path);
      if (channels != 1) fail("only mono WAV is supported (" + std::to_string(channels) + " channels): " + path);
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      if (format == kFormatPcm && bits == 16) {
        std::vector<std::int16_t> pcm(size / 2);
        in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 2));
        if (!in) fail("truncated WAV data: " + path);
        w.samples.reserve(pcm.size());
        for (auto s : pcm) w.samples.push_back(static_cast<double>(s) / 32768.0);
      } else if (format == kFormatFloat && bits == 32) {
        std::vector<float> pcm(size / 4);
        in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 4));
        if (!in) fail("truncated WAV data: " + path);
        w.samples.assign(pcm.begin(), pcm.end());
        for (double s : w.samples) {
          if (!std::isfinite(s)) fail("non-finite sample in " + path);
        }
      } else {
        fail("unsupported WAV encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
             " bits): " + path);
      }
      return w;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
}

void write_wav(const std::string& path, const Waveform& w) {
  auto out = detail::open_out(path);
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 4;
  out.write("RIFF", 4);
  detail::put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::put<std::uint32_t>(out, 16);
  detail::put<std::uint16_t>(out, kFormatFloat);
  detail::put<std::uint16_t>(out, 1);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * 4);
  detail::put<std::uint16_t>(out, 4);
  detail::put<std::uint16_t>(out, 32);
  out.write("data", 4);
  detail::put<std::uint32_t>(out, data_bytes);
  for (double s : w.samples) detail::put<float>(out, static_cast<float>(s));
  if (!out) throw RuntimeAbort("write failed: " + path);
}

}  // namespace eowsed

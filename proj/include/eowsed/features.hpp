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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eowsed/annotations.hpp"
#include "eowsed/common.hpp"

namespace eowsed {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct FeatureConfig {
  int sample_rate = 16000;
  double frame_len_ms = 128.0;
  double hop_ms = 16.0;
  int n_mels = 64;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
  /// Per-clip zero-mean / unit-variance scaling after the log.
  bool standardize = true;

  int frame_samples() const;
  int hop_samples() const;
  int n_fft() const;
  double hop_seconds() const { return hop_ms / 1000.0; }
  void validate() const;
};

struct FeatureMatrix {
  Matrix values;  // T x F
  double hop_seconds = 0.016;

  int frames() const { return static_cast<int>(values.rows()); }
  int bins() const { return static_cast<int>(values.cols()); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular mel filters, n_mels x (n_fft/2 + 1), peak weight 1 per row.
Matrix mel_filterbank(int n_fft, int n_mels, int sample_rate, double fmin, double fmax);

/// Frequency (Hz) at which each filterbank row peaks.
std::vector<double> mel_center_frequencies(int n_mels, double fmin, double fmax);

/// floor((len - frame) / hop) + 1, or 0 when the waveform is shorter than a frame.
int num_frames(std::size_t n_samples, int frame_samples, int hop_samples);

FeatureMatrix log_mel_spectrogram(const Waveform& w, const FeatureConfig& cfg);

/// Zero mean, unit variance over the whole matrix (eps added to the std).
void standardize_in_place(Matrix& values, double eps = 1e-8);

struct MixupDraw {
  double lambda = 1.0;
  double alpha = 0.2;
  double beta = 0.2;
};

/// Beta(alpha, beta) draw through the two-gamma construction.
MixupDraw sample_mixup(std::mt19937_64& rng, double alpha = 0.2, double beta = 0.2);

struct LabeledFeatures {
  FeatureMatrix features;
  SedTargets sed;
  SodTargets sod;
};

/// lambda * a + (1 - lambda) * b on features, SED targets and SOD distributions.
LabeledFeatures mixup(const LabeledFeatures& a, const LabeledFeatures& b, const MixupDraw& draw);

/// Flat container: u64 T, u64 F, f64 hop_seconds, then T*F row-major f64 (little endian).
void write_feature_matrix(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(const std::string& path);

/// Mono PCM WAV, 16-bit integer or 32-bit float.
Waveform read_wav(const std::string& path);
/// Writes 32-bit float mono.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace eowsed

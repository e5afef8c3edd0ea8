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

#include "eowsed/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "binary_io.hpp"

namespace eowsed {

int FeatureConfig::frame_samples() const {
  return static_cast<int>(std::lround(frame_len_ms * sample_rate / 1000.0));
}

int FeatureConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

int FeatureConfig::n_fft() const { return static_cast<int>(std::bit_ceil(static_cast<unsigned>(frame_samples()))); }

void FeatureConfig::validate() const {
  require(sample_rate > 0, "feature config: sample_rate must be positive");
  require(hop_ms > 0.0 && frame_len_ms > hop_ms, "feature config: need frame_len_ms > hop_ms > 0");
  require(n_mels > 0, "feature config: n_mels must be positive");
  require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
          "feature config: need 0 <= fmin < fmax <= sample_rate/2");
  require(log_floor > 0.0, "feature config: log_floor must be positive");
  require(hop_samples() >= 1, "feature config: hop shorter than one sample");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_points(int n_mels, double fmin, double fmax) {
  const double lo = hz_to_mel(fmin);
  const double hi = hz_to_mel(fmax);
  std::vector<double> hz(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (n_mels + 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_center_frequencies(int n_mels, double fmin, double fmax) {
  auto pts = mel_points(n_mels, fmin, fmax);
  return {pts.begin() + 1, pts.end() - 1};
}

Matrix mel_filterbank(int n_fft, int n_mels, int sample_rate, double fmin, double fmax) {
  require(n_fft > 0 && n_mels > 0, "mel_filterbank: n_fft and n_mels must be positive");
  require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
          "mel_filterbank: need 0 <= fmin < fmax <= sample_rate/2");
  const int n_bins = n_fft / 2 + 1;
  const auto pts = mel_points(n_mels, fmin, fmax);
  Matrix fb = Matrix::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = pts[m], center = pts[m + 1], right = pts[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb(m, k) = w;
    }
    if (fb.row(m).maxCoeff() <= 0.0) {
      fail("mel_filterbank: n_mels=" + std::to_string(n_mels) + " too large for n_fft=" +
           std::to_string(n_fft) + " (row " + std::to_string(m) + " covers no FFT bin)");
    }
  }
  return fb;
}

int num_frames(std::size_t n_samples, int frame_samples, int hop_samples) {
  if (n_samples < static_cast<std::size_t>(frame_samples)) return 0;
  return static_cast<int>((n_samples - static_cast<std::size_t>(frame_samples)) / hop_samples) + 1;
}

void standardize_in_place(Matrix& values, double eps) {
  const double mean = values.mean();
  values.array() -= mean;
  const double var = values.squaredNorm() / static_cast<double>(values.size());
  values /= std::sqrt(var) + eps;
}

FeatureMatrix log_mel_spectrogram(const Waveform& w, const FeatureConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate) {
    fail("log_mel_spectrogram: sample rate " + std::to_string(w.sample_rate) + " Hz not supported (expected " +
         std::to_string(cfg.sample_rate) + " Hz; resampling is not implemented)");
  }
  const int frame = cfg.frame_samples();
  const int hop = cfg.hop_samples();
  const int n_fft = cfg.n_fft();
  const int n_bins = n_fft / 2 + 1;
  const int T = num_frames(w.samples.size(), frame, hop);
  if (T < 1) {
    fail("log_mel_spectrogram: waveform of " + std::to_string(w.samples.size()) +
         " samples is shorter than one frame (" + std::to_string(frame) + ")");
  }
  for (double s : w.samples) {
    if (!std::isfinite(s)) fail("log_mel_spectrogram: non-finite sample");
  }

  const Matrix fb = mel_filterbank(n_fft, cfg.n_mels, cfg.sample_rate, cfg.fmin, cfg.fmax);

  // Periodic Hann.
  std::vector<double> window(static_cast<std::size_t>(frame));
  for (int n = 0; n < frame; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / frame);
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(n_fft), 0.0);
  std::vector<std::complex<double>> spec;
  Matrix power(n_bins, T);
  for (int t = 0; t < T; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    for (int n = 0; n < frame; ++n) buf[n] = w.samples[start + n] * window[n];
    std::fill(buf.begin() + frame, buf.end(), 0.0);
    fft.fwd(spec, buf);
    for (int k = 0; k < n_bins; ++k) power(k, t) = std::norm(spec[k]);
  }

  FeatureMatrix out;
  out.hop_seconds = cfg.hop_seconds();
  out.values = (fb * power).transpose();
  out.values = out.values.array().max(cfg.log_floor).log().matrix();
  if (cfg.standardize) standardize_in_place(out.values);
  return out;
}

MixupDraw sample_mixup(std::mt19937_64& rng, double alpha, double beta) {
  require(alpha > 0.0 && beta > 0.0, "sample_mixup: Beta parameters must be positive");
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y > 0.0) return {x / (x + y), alpha, beta};
  }
}

LabeledFeatures mixup(const LabeledFeatures& a, const LabeledFeatures& b, const MixupDraw& draw) {
  require(draw.lambda >= 0.0 && draw.lambda <= 1.0, "mixup: lambda outside [0,1]");
  const auto same = [](const Matrix& x, const Matrix& y) { return x.rows() == y.rows() && x.cols() == y.cols(); };
  if (!same(a.features.values, b.features.values) || !same(a.sed.values, b.sed.values) ||
      !same(a.sod.values, b.sod.values)) {
    fail("mixup: shape mismatch between the two examples");
  }
  const double l = draw.lambda;
  const double k = 1.0 - l;
  LabeledFeatures out;
  out.features.hop_seconds = a.features.hop_seconds;
  // Both products are materialized before the sum, so no fused multiply-add can make
  // mixup(a, b, l) and mixup(b, a, 1 - l) round differently.
  const auto blend = [&](const Matrix& x, const Matrix& y) -> Matrix {
    const Matrix lx = l * x;
    const Matrix ky = k * y;
    return lx + ky;
  };
  out.features.values = blend(a.features.values, b.features.values);
  out.sed.class_map = a.sed.class_map;
  out.sed.values = blend(a.sed.values, b.sed.values);
  out.sod.values = blend(a.sod.values, b.sod.values);
  return out;
}

void write_feature_matrix(const std::string& path, const FeatureMatrix& m) {
  auto out = detail::open_out(path);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.frames()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(m.bins()));
  detail::put<double>(out, m.hop_seconds);
  const RowMajorMatrix rm = m.values;
  detail::put_doubles(out, rm.data(), static_cast<std::size_t>(rm.size()));
  if (!out) throw RuntimeAbort("write failed: " + path);
}

FeatureMatrix read_feature_matrix(const std::string& path) {
  auto in = detail::open_in(path);
  const auto T = detail::get<std::uint64_t>(in, "feature header");
  const auto F = detail::get<std::uint64_t>(in, "feature header");
  FeatureMatrix m;
  m.hop_seconds = detail::get<double>(in, "feature header");
  RowMajorMatrix rm(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(F));
  detail::get_doubles(in, rm.data(), static_cast<std::size_t>(rm.size()), "feature values");
  m.values = rm;
  return m;
}

}  // namespace eowsed

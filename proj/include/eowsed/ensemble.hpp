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

#include <string>
#include <vector>

#include "eowsed/annotations.hpp"
#include "eowsed/common.hpp"
#include "eowsed/features.hpp"
#include "eowsed/model.hpp"

namespace eowsed {

/// Per-frame model output for one clip.
struct Posteriorgram {
  Matrix sed;  // T x C probabilities
  Matrix sod;  // T x 4 probabilities, last column = uncertainty
  double hop_seconds = 0.016;

  int frames() const { return static_cast<int>(sed.rows()); }
  int classes() const { return static_cast<int>(sed.cols()); }
  void validate() const;
};

Posteriorgram predict(const ModelParams& p, const FeatureMatrix& x);

/// u64 T, u64 C, f64 hop_seconds, SED (T x C) then SOD (T x 4), row-major f64.
void write_posteriorgram(const std::string& path, const Posteriorgram& pg);
Posteriorgram read_posteriorgram(const std::string& path);

/// conf[t] = 1 - p(uncertainty) at frame t.
Vector frame_confidence(const Eigen::Ref<const Matrix>& sod);

struct FusedPrediction {
  Matrix sed;  // T x C
  double hop_seconds = 0.016;
};

/// Confidence-weighted mean per frame; frames whose total confidence is below
/// kMinConfidenceMass fall back to the unweighted mean.
FusedPrediction fuse_calibrated(const std::vector<Posteriorgram>& members, const std::vector<Vector>& confidences);
inline constexpr double kMinConfidenceMass = 1e-12;

/// Fixed-weight mean; weights nonnegative with a positive sum.
FusedPrediction fuse_average(const std::vector<Posteriorgram>& members, const std::vector<double>& weights);
/// Equal weights 1/M.
FusedPrediction fuse_average(const std::vector<Posteriorgram>& members);

/// Sliding median over [t - w/2, t + w/2] clipped to the track. Even-sized
/// (truncated) windows take the mean of the two middle values.
Vector median_filter(const Eigen::Ref<const Vector>& track, int window = 7);
/// median_filter applied to every column.
Matrix median_filter_columns(const Eigen::Ref<const Matrix>& tracks, int window = 7);

/// 1 where probability > threshold.
Matrix binarize(const Eigen::Ref<const Matrix>& probs, double threshold = 0.5);

/// Each maximal run [t0, t1] of frames above threshold becomes (t0*hop, (t1+1)*hop).
EventList decode_events(const FusedPrediction& fused, const ClassMap& classes, double threshold = 0.5);

}  // namespace eowsed

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

#include "eowsed/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "eowsed/eow.hpp"
#include "eowsed/training.hpp"

namespace eowsed {

void Posteriorgram::validate() const {
  require(sod.rows() == sed.rows() && sod.cols() == kSodOutputs, "posteriorgram: SOD must be T x 4 matching SED");
  require(sed.allFinite() && sod.allFinite(), "posteriorgram: non-finite values");
  require((sed.array() >= 0.0).all() && (sed.array() <= 1.0).all(), "posteriorgram: SED probabilities outside [0,1]");
  require(((sod.rowwise().sum().array() - 1.0).abs() <= 1e-9).all(), "posteriorgram: SOD rows must sum to 1");
}

Posteriorgram predict(const ModelParams& p, const FeatureMatrix& x) {
  const auto fo = forward(p, x);
  Posteriorgram pg;
  pg.sed = sigmoid(fo.sed_logits);
  pg.sod = softmax_rows(fo.sod_logits);
  pg.hop_seconds = x.hop_seconds;
  return pg;
}

void write_posteriorgram(const std::string& path, const Posteriorgram& pg) {
  pg.validate();
  auto out = detail::open_out(path);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(pg.frames()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(pg.classes()));
  detail::put<double>(out, pg.hop_seconds);
  const RowMajorMatrix sed = pg.sed;
  const RowMajorMatrix sod = pg.sod;
  detail::put_doubles(out, sed.data(), static_cast<std::size_t>(sed.size()));
  detail::put_doubles(out, sod.data(), static_cast<std::size_t>(sod.size()));
  if (!out) throw RuntimeAbort("write failed: " + path);
}

Posteriorgram read_posteriorgram(const std::string& path) {
  auto in = detail::open_in(path);
  const auto T = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in, "posteriorgram header"));
  const auto C = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in, "posteriorgram header"));
  Posteriorgram pg;
  pg.hop_seconds = detail::get<double>(in, "posteriorgram header");
  RowMajorMatrix sed(T, C), sod(T, kSodOutputs);
  detail::get_doubles(in, sed.data(), static_cast<std::size_t>(sed.size()), "SED matrix");
  detail::get_doubles(in, sod.data(), static_cast<std::size_t>(sod.size()), "SOD matrix");
  pg.sed = sed;
  pg.sod = sod;
  pg.validate();
  return pg;
}

Vector frame_confidence(const Eigen::Ref<const Matrix>& sod) {
  require(sod.cols() == kSodOutputs, "frame_confidence: SOD probabilities must be T x 4");
  return (1.0 - sod.col(kUncertaintyIndex).array()).matrix();
}

namespace {

void check_members(const std::vector<Posteriorgram>& members) {
  require(!members.empty(), "fusion: need at least one member");
  for (const auto& m : members) {
    if (m.sed.rows() != members.front().sed.rows() || m.sed.cols() != members.front().sed.cols()) {
      fail("fusion: member posteriorgrams differ in shape");
    }
  }
}

/// A convex combination lies inside the member range in exact arithmetic; clamping
/// removes the last-ulp overshoot so the bound holds bit-for-bit (and M = 1 is the identity).
void clamp_to_member_range(Matrix& fused, const std::vector<Posteriorgram>& members) {
  Matrix lo = members.front().sed, hi = members.front().sed;
  for (const auto& m : members) {
    lo = lo.cwiseMin(m.sed);
    hi = hi.cwiseMax(m.sed);
  }
  fused = fused.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

FusedPrediction fuse_calibrated(const std::vector<Posteriorgram>& members, const std::vector<Vector>& confidences) {
  check_members(members);
  require(confidences.size() == members.size(), "fuse_calibrated: one confidence track per member required");
  const auto T = members.front().sed.rows();
  for (const auto& c : confidences) {
    require(c.size() == T, "fuse_calibrated: confidence track length differs from T");
    require((c.array() >= 0.0).all(), "fuse_calibrated: negative confidence");
  }
  FusedPrediction out;
  out.hop_seconds = members.front().hop_seconds;
  out.sed = Matrix::Zero(T, members.front().sed.cols());
  Vector mass = Vector::Zero(T);
  for (std::size_t m = 0; m < members.size(); ++m) {
    out.sed += confidences[m].asDiagonal() * members[m].sed;
    mass += confidences[m];
  }
  const double inv_m = 1.0 / static_cast<double>(members.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    if (mass[t] < kMinConfidenceMass) {
      out.sed.row(t).setZero();
      for (const auto& mem : members) out.sed.row(t) += inv_m * mem.sed.row(t);
    } else {
      out.sed.row(t) /= mass[t];
    }
  }
  clamp_to_member_range(out.sed, members);
  return out;
}

FusedPrediction fuse_average(const std::vector<Posteriorgram>& members, const std::vector<double>& weights) {
  check_members(members);
  require(weights.size() == members.size(), "fuse_average: one weight per member required");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), "fuse_average: weights must be finite and nonnegative");
    total += w;
  }
  require(total > 0.0, "fuse_average: weights sum to zero");
  FusedPrediction out;
  out.hop_seconds = members.front().hop_seconds;
  out.sed = Matrix::Zero(members.front().sed.rows(), members.front().sed.cols());
  for (std::size_t m = 0; m < members.size(); ++m) out.sed += (weights[m] / total) * members[m].sed;
  clamp_to_member_range(out.sed, members);
  return out;
}

FusedPrediction fuse_average(const std::vector<Posteriorgram>& members) {
  return fuse_average(members, std::vector<double>(members.size(), 1.0 / static_cast<double>(members.size())));
}

Vector median_filter(const Eigen::Ref<const Vector>& track, int window) {
  require(window >= 1 && window % 2 == 1, "median_filter: window must be odd and >= 1");
  const Eigen::Index T = track.size();
  const Eigen::Index half = window / 2;
  Vector out(T);
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(window));
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
    const Eigen::Index hi = std::min<Eigen::Index>(T - 1, t + half);
    buf.assign(track.data() + lo, track.data() + hi + 1);
    const std::size_t n = buf.size();
    const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(buf.begin(), mid, buf.end());
    if (n % 2 == 1) {
      out[t] = *mid;
    } else {
      const double upper = *mid;
      const double lower = *std::max_element(buf.begin(), mid);
      out[t] = 0.5 * (lower + upper);
    }
  }
  return out;
}

Matrix median_filter_columns(const Eigen::Ref<const Matrix>& tracks, int window) {
  Matrix out(tracks.rows(), tracks.cols());
  for (Eigen::Index c = 0; c < tracks.cols(); ++c) out.col(c) = median_filter(tracks.col(c), window);
  return out;
}

Matrix binarize(const Eigen::Ref<const Matrix>& probs, double threshold) {
  return (probs.array() > threshold).cast<double>().matrix();
}

EventList decode_events(const FusedPrediction& fused, const ClassMap& classes, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, "decode_events: threshold must lie in (0,1)");
  require(fused.sed.cols() == classes.size(), "decode_events: class map does not match prediction width");
  EventList out;
  const auto T = fused.sed.rows();
  const double hop = fused.hop_seconds;
  out.duration = static_cast<double>(T) * hop;
  for (Eigen::Index c = 0; c < fused.sed.cols(); ++c) {
    Eigen::Index t = 0;
    while (t < T) {
      if (fused.sed(t, c) > threshold) {
        const Eigen::Index start = t;
        while (t < T && fused.sed(t, c) > threshold) ++t;
        out.events.push_back({static_cast<double>(start) * hop, static_cast<double>(t) * hop,
                              classes.name(static_cast<int>(c))});
      } else {
        ++t;
      }
    }
  }
  sort_events(out.events);
  return out;
}

}  // namespace eowsed

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

// Shared fixtures: a tiny network and a random labelled clip for gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "eowsed/config.hpp"
#include "eowsed/eow.hpp"
#include "eowsed/model.hpp"
#include "eowsed/training.hpp"

namespace eowsed::testing {

/// One conv block, one Bi-GRU layer of width 4, two event classes.
inline ArchConfig tiny_arch() {
  ArchConfig a;
  a.n_mels = 8;
  a.conv_blocks = {{2, 4}};
  a.gru_layers = 1;
  a.gru_hidden = 4;
  a.n_classes = 2;
  return a;
}

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline LabeledFeatures random_clip(int frames, int mels, int classes, std::mt19937_64& rng) {
  LabeledFeatures c;
  c.features.values = gaussian(frames, mels, rng);
  std::bernoulli_distribution on(0.4);
  c.sed.values = Matrix::Zero(frames, classes);
  for (Eigen::Index i = 0; i < c.sed.values.size(); ++i) c.sed.values.data()[i] = on(rng) ? 1.0 : 0.0;
  std::uniform_int_distribution<int> lab(0, kSodKnown - 1);
  IntVector labels(frames);
  for (int t = 0; t < frames; ++t) labels[t] = lab(rng);
  c.sod = SodTargets::from_labels(labels);
  return c;
}

/// Central differences of f at x over the listed coordinates.
template <typename F>
Vector finite_difference(F&& f, Vector x, const std::vector<Eigen::Index>& coords, double h = 1e-5) {
  Vector g(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const double x0 = x[coords[k]];
    x[coords[k]] = x0 + h;
    const double fp = f(x);
    x[coords[k]] = x0 - h;
    const double fm = f(x);
    x[coords[k]] = x0;
    g[static_cast<Eigen::Index>(k)] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

/// Result of comparing the analytic joint-loss gradient with central differences on every parameter.
struct GradCheck {
  double rel_error = 0.0;
  /// Largest per-tensor relative error.
  double worst_tensor_error = 0.0;
  /// Largest |a - n| / max(|a|, |n|, floor) over single coordinates.
  double worst_coord_error = 0.0;
  Eigen::Index n_params = 0;
  std::string worst_param;
};

inline GradCheck check_full_gradient(std::uint64_t seed, double tau = 0.7, double lambda = 0.3, double floor = 1e-6) {
  std::mt19937_64 rng(seed);
  ModelParams p = init_params(tiny_arch(), seed);
  // Nonzero shifts and biases so no coordinate sits at an uninformative point.
  p.values += 0.1 * gaussian(p.values.size(), 1, rng);
  std::vector<LabeledFeatures> clips = {random_clip(6, 8, 2, rng), random_clip(6, 8, 2, rng)};
  std::vector<const LabeledFeatures*> batch = {&clips[0], &clips[1]};
  const Matrix negatives = gaussian(3, p.arch.embedding_dim(), rng);

  const Vector analytic = total_loss(p, batch, negatives, tau, lambda, true).grad;
  std::vector<Eigen::Index> all(static_cast<std::size_t>(p.values.size()));
  std::iota(all.begin(), all.end(), 0);
  auto loss_at = [&](const Vector& v) {
    ModelParams q{p.arch, v};
    return total_loss(q, batch, negatives, tau, lambda, false).loss.total;
  };
  const Vector numeric = finite_difference(loss_at, p.values, all);

  GradCheck out;
  out.rel_error = relative_error(analytic, numeric);
  out.n_params = p.values.size();
  double worst = -1.0;
  const ParamLayout layout = p.layout();
  for (const auto& s : layout.slices()) {
    const double e = relative_error(analytic.segment(s.offset, s.size()), numeric.segment(s.offset, s.size()));
    if (e > worst) {
      worst = e;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2e", e);
      out.worst_param = s.name + " (" + buf + ")";
    }
  }
  out.worst_tensor_error = worst;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double d = std::abs(analytic[i] - numeric[i]) / std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    out.worst_coord_error = std::max(out.worst_coord_error, d);
  }
  return out;
}

}  // namespace eowsed::testing

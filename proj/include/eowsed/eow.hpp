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

// Open-world (P+1)-way softmax on the SOD head: probabilities, loss, energy,
// and the Langevin negative sampler over the SOD-head input space.

#include <cmath>
#include <cstdint>
#include <random>

#include "eowsed/annotations.hpp"
#include "eowsed/common.hpp"
#include "eowsed/model.hpp"

namespace eowsed {

using Vector4 = Eigen::Matrix<double, kSodOutputs, 1>;

/// Row-wise log-sum-exp, max-shifted.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> logsumexp_rows(const Eigen::MatrixBase<Derived>& x) {
  const auto m = x.rowwise().maxCoeff().eval();
  return m.array() + (x.colwise() - m).array().exp().rowwise().sum().log();
}

/// Row-wise softmax, max-shifted so large logits never overflow.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  const auto m = x.rowwise().maxCoeff().eval();
  auto e = (x.colwise() - m).array().exp().matrix().eval();
  const auto s = e.rowwise().sum().eval();
  return (e.array().colwise() / s.array()).matrix();
}

/// Four probabilities; the last is the open-world uncertainty.
struct EowProbs {
  Vector4 probs = Vector4::Constant(0.25);
};

EowProbs eow_softmax(const Vector4& logits);

/// Probability mass on the uncertainty output.
inline double uncertainty(const EowProbs& p) { return p.probs[kUncertaintyIndex]; }

/// -log sum_{j<P} exp(logit_j) + (gamma/2) * |embedding|^2. The uncertainty logit is excluded.
double energy(const Vector4& sod_logits, const Eigen::Ref<const Vector>& embedding, double gamma);

/// d energy / d embedding through the SOD head of `p` (rows of the result are per-embedding gradients).
Matrix energy_grad(const ModelParams& p, const Eigen::Ref<const Matrix>& embeddings, double gamma);

enum class NegativeSource { Sgld, Gaussian };

struct SgldConfig {
  int n_steps = 20;
  double step_size = 1.0;
  double noise_scale = 0.01;
  int buffer_size = 256;
  double reinit_prob = 0.05;
  /// Quadratic containment weight in the energy.
  double gamma = 2.0;
  NegativeSource source = NegativeSource::Sgld;

  void validate() const;
};

/// Persistent chains in R^D (one row per chain).
struct SgldBuffer {
  Matrix samples;

  static SgldBuffer standard_normal(int size, int dim, std::mt19937_64& rng);
  bool initialized() const { return samples.size() > 0; }
};

struct SgldDraw {
  Matrix samples;  // n x D
  /// Chains restarted because a step produced a non-finite value.
  int nonfinite_resets = 0;
};

/// n Langevin draws x <- x - (alpha/2) dE/dx + noise_scale*sqrt(alpha)*eps, using frozen weights.
/// Initializes the buffer on first use. Gaussian source returns N(0, I) draws and leaves the buffer alone.
SgldDraw sgld_sample(const FrozenParams& frozen, SgldBuffer& buffer, const SgldConfig& cfg, std::mt19937_64& rng,
                     int n);

struct EowLossTerms {
  double mll_term = 0.0;
  double open_term = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct EowLossGrads {
  EowLossTerms terms;
  Matrix d_sod_logits;  // T x 4
  Matrix d_neg_logits;  // n x 4, already weighted by lambda
};

/// mll: frame mean of cross-entropy against the target over the known classes
/// (no target mass on uncertainty); open: mean of -log p(uncertainty) over negatives.
EowLossTerms eow_loss(const Eigen::Ref<const Matrix>& sod_logits, const SodTargets& target,
                      const Eigen::Ref<const Matrix>& neg_logits, double lambda);
EowLossGrads eow_loss_with_grad(const Eigen::Ref<const Matrix>& sod_logits, const SodTargets& target,
                                const Eigen::Ref<const Matrix>& neg_logits, double lambda);

/// Mean of -log p(uncertainty) over negative logits (n x 4, n >= 1); optionally its logit gradient.
double open_world_term(const Eigen::Ref<const Matrix>& neg_logits, Matrix* d_logits = nullptr);

/// Per-row uncertainty probability for T x 4 logits.
Vector uncertainty_track(const Eigen::Ref<const Matrix>& sod_logits);

}  // namespace eowsed

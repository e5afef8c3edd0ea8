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

#include "eowsed/eow.hpp"

namespace eowsed {

EowProbs eow_softmax(const Vector4& logits) {
  if (!logits.allFinite()) fail("eow_softmax: non-finite logit");
  const double m = logits.maxCoeff();
  EowProbs out;
  out.probs = (logits.array() - m).exp();
  out.probs /= out.probs.sum();
  return out;
}

double energy(const Vector4& sod_logits, const Eigen::Ref<const Vector>& embedding, double gamma) {
  const auto known = sod_logits.head<kSodKnown>();
  const double m = known.maxCoeff();
  const double lse = m + std::log((known.array() - m).exp().sum());
  return -lse + 0.5 * gamma * embedding.squaredNorm();
}

Matrix energy_grad(const ModelParams& p, const Eigen::Ref<const Matrix>& embeddings, double gamma) {
  const ParamLayout layout(p.arch);
  const auto w = view(p.values, layout.slice("sod.weight"));
  const Matrix logits = sod_head(p, embeddings);
  const Matrix pk = softmax_rows(logits.leftCols(kSodKnown));
  return -pk * w.leftCols(kSodKnown).transpose() + gamma * embeddings;
}

void SgldConfig::validate() const {
  require(n_steps >= 0, "sgld: n_steps must be nonnegative");
  require(step_size >= 0.0 && noise_scale >= 0.0, "sgld: step size and noise scale must be nonnegative");
  require(buffer_size >= 1, "sgld: buffer_size must be positive");
  require(reinit_prob >= 0.0 && reinit_prob <= 1.0, "sgld: reinit_prob outside [0,1]");
  require(gamma >= 0.0, "sgld: gamma must be nonnegative");
}

SgldBuffer SgldBuffer::standard_normal(int size, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  SgldBuffer b;
  b.samples.resize(size, dim);
  for (Eigen::Index i = 0; i < b.samples.size(); ++i) b.samples.data()[i] = gauss(rng);
  return b;
}

SgldDraw sgld_sample(const FrozenParams& frozen, SgldBuffer& buffer, const SgldConfig& cfg, std::mt19937_64& rng,
                     int n) {
  cfg.validate();
  require(n >= 0, "sgld_sample: negative draw count");
  const int D = frozen.params.arch.embedding_dim();
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto fill_normal = [&](auto&& row) {
    for (Eigen::Index j = 0; j < row.size(); ++j) row[j] = gauss(rng);
  };

  SgldDraw draw;
  draw.samples.resize(n, D);
  if (cfg.source == NegativeSource::Gaussian) {
    for (int i = 0; i < n; ++i) fill_normal(draw.samples.row(i));
    return draw;
  }

  if (!buffer.initialized()) buffer = SgldBuffer::standard_normal(cfg.buffer_size, D, rng);
  require(buffer.samples.cols() == D, "sgld_sample: buffer dimension does not match the model");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(buffer.samples.rows()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> slots(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    slots[i] = pick(rng);
    if (unit(rng) < cfg.reinit_prob) {
      fill_normal(draw.samples.row(i));
    } else {
      draw.samples.row(i) = buffer.samples.row(slots[i]);
    }
  }

  const double drift = 0.5 * cfg.step_size;
  const double diffusion = cfg.noise_scale * std::sqrt(cfg.step_size);
  Matrix noise(n, D);
  for (int step = 0; step < cfg.n_steps; ++step) {
    const Matrix grad = energy_grad(frozen.params, draw.samples, cfg.gamma);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = gauss(rng);
    draw.samples += -drift * grad + diffusion * noise;
    for (int i = 0; i < n; ++i) {
      if (!draw.samples.row(i).allFinite()) {
        fill_normal(draw.samples.row(i));
        ++draw.nonfinite_resets;
      }
    }
  }
  for (int i = 0; i < n; ++i) buffer.samples.row(slots[i]) = draw.samples.row(i);
  return draw;
}

namespace {

void check_target(const SodTargets& target, Eigen::Index frames) {
  require(target.values.rows() == frames && target.values.cols() == kSodKnown,
          "eow_loss: SOD targets must be T x 3 matching the logits");
  require((target.values.array() >= 0.0).all() && (target.values.array() <= 1.0).all(),
          "eow_loss: SOD targets outside [0,1]");
  require(((target.values.rowwise().sum().array() - 1.0).abs() < 1e-9).all(), "eow_loss: SOD target rows must sum to 1");
}

}  // namespace

EowLossGrads eow_loss_with_grad(const Eigen::Ref<const Matrix>& sod_logits, const SodTargets& target,
                                const Eigen::Ref<const Matrix>& neg_logits, double lambda) {
  require(sod_logits.cols() == kSodOutputs && sod_logits.rows() >= 1, "eow_loss: logits must be T x 4, T >= 1");
  require(lambda >= 0.0, "eow_loss: lambda must be nonnegative");
  require(sod_logits.allFinite() && neg_logits.allFinite(), "eow_loss: non-finite logits");
  check_target(target, sod_logits.rows());
  if (lambda > 0.0 && neg_logits.rows() == 0) fail("eow_loss: lambda > 0 requires at least one negative sample");
  if (neg_logits.rows() > 0) require(neg_logits.cols() == kSodOutputs, "eow_loss: negative logits must be n x 4");

  EowLossGrads out;
  const auto T = static_cast<double>(sod_logits.rows());
  const Vector lse = logsumexp_rows(sod_logits);
  const Matrix logp = sod_logits.colwise() - lse;
  out.terms.mll_term = -(target.values.array() * logp.leftCols(kSodKnown).array()).sum() / T;
  out.d_sod_logits = logp.array().exp().matrix();
  out.d_sod_logits.leftCols(kSodKnown) -= target.values;
  out.d_sod_logits /= T;

  out.terms.lambda = lambda;
  if (neg_logits.rows() > 0) {
    out.terms.open_term = open_world_term(neg_logits, &out.d_neg_logits);
    out.d_neg_logits *= lambda;
  } else {
    out.d_neg_logits.resize(0, kSodOutputs);
  }
  out.terms.total = out.terms.mll_term + lambda * out.terms.open_term;
  return out;
}

double open_world_term(const Eigen::Ref<const Matrix>& neg_logits, Matrix* d_logits) {
  require(neg_logits.rows() >= 1 && neg_logits.cols() == kSodOutputs, "open_world_term: need n x 4 logits, n >= 1");
  const auto n = static_cast<double>(neg_logits.rows());
  const Vector lse = logsumexp_rows(neg_logits);
  const Matrix logp = neg_logits.colwise() - lse;
  if (d_logits) {
    *d_logits = logp.array().exp().matrix();
    d_logits->col(kUncertaintyIndex).array() -= 1.0;
    *d_logits /= n;
  }
  return -logp.col(kUncertaintyIndex).sum() / n;
}

EowLossTerms eow_loss(const Eigen::Ref<const Matrix>& sod_logits, const SodTargets& target,
                      const Eigen::Ref<const Matrix>& neg_logits, double lambda) {
  return eow_loss_with_grad(sod_logits, target, neg_logits, lambda).terms;
}

Vector uncertainty_track(const Eigen::Ref<const Matrix>& sod_logits) {
  return softmax_rows(sod_logits).col(kUncertaintyIndex);
}

}  // namespace eowsed

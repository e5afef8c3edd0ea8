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
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "eowsed/dataset.hpp"
#include "eowsed/eow.hpp"
#include "eowsed/features.hpp"
#include "eowsed/model.hpp"

namespace eowsed {

struct TrainConfig {
  /// Weight of the open-world loss in the joint objective.
  double tau = 0.1;
  double lr = 0.001;
  int batch_size = 8;
  int max_epochs = 30;
  int warmup_epochs = 5;
  int patience = 5;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool mixup = true;
  double mixup_alpha = 0.2;
  double mixup_beta = 0.2;
  /// Weight of the negative-sample term inside the open-world loss.
  double lambda = 0.1;
  /// Negatives drawn per optimizer step; 0 means batch_size.
  int negatives_per_batch = 0;
  SgldConfig sgld;
  /// Worker threads for ensemble training; 0 picks the hardware concurrency.
  int threads = 0;

  int negatives() const { return negatives_per_batch > 0 ? negatives_per_batch : batch_size; }
  bool uses_open_loss() const { return tau > 0.0; }
  void validate() const;

  /// Batch 48, 200 epochs, 50 warmup epochs.
  static TrainConfig full_scale();
};

/// Features and frame targets for one clip.
struct Example {
  std::string id;
  int domain_id = 0;
  LabeledFeatures data;
  EventList events;
};

Example make_example(const Clip& clip, const FeatureConfig& features, const ClassMap& classes);
std::vector<Example> make_examples(const std::vector<Clip>& clips, const FeatureConfig& features,
                                   const ClassMap& classes);

/// Mean over frames and classes of the logit-form binary cross-entropy.
double bce_loss(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& targets);
/// d bce_loss / d logits.
Matrix bce_grad(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& targets);

inline Matrix sigmoid(const Eigen::Ref<const Matrix>& logits) {
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double mll = 0.0;
  double open = 0.0;
};

struct BatchLoss {
  LossBreakdown loss;
  Gradients grad;  // empty unless requested
};

/// Joint objective over a batch: mean_clips(bce + tau * mll) + tau * lambda * open(negatives).
/// `negatives` are detached embeddings (n x D); gradients reach the SOD head only through them.
BatchLoss total_loss(const ModelParams& p, const std::vector<const LabeledFeatures*>& batch,
                     const Eigen::Ref<const Matrix>& negatives, double tau, double lambda, bool with_grad);

/// Shuffled partition of [0, n) into consecutive batches (the last may be short).
std::vector<std::vector<int>> epoch_batches(int n, int batch_size, std::mt19937_64& rng);

/// Patience counter on a monitored loss; lower is better.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// Returns true when `value` is a new best.
  bool update(int epoch, double value);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = -1;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown train;
  LossBreakdown validation;
  int nonfinite_resets = 0;
};

struct TrainedModel {
  ModelParams params;  // best checkpoint
  std::vector<EpochRecord> history;
  std::uint64_t seed = 0;
  int best_epoch = -1;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  SgldBuffer buffer;
};

struct EnsembleBundle {
  std::vector<TrainedModel> members;
};

using EpochCallback = std::function<void(std::uint64_t seed, const EpochRecord&)>;

TrainedModel train_model(const std::vector<Example>& train, const std::vector<Example>& validation,
                         const ArchConfig& arch, const TrainConfig& cfg, std::uint64_t seed,
                         const EpochCallback& on_epoch = {});

/// One model per seed, in seed order. Any member failure fails the bundle.
EnsembleBundle train_ensemble(const std::vector<Example>& train, const std::vector<Example>& validation,
                              const ArchConfig& arch, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Writes epoch, lr and every loss component, one row per completed epoch.
void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace eowsed

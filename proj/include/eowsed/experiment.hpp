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

// The synth / train / eval / compare pipeline behind the command-line tool.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eowsed/config.hpp"
#include "eowsed/ensemble.hpp"
#include "eowsed/metrics.hpp"
#include "eowsed/training.hpp"

namespace eowsed {

/// Posteriorgrams of one model, keyed by clip id.
using ClipPosteriors = std::map<std::string, Posteriorgram>;

struct ArmResult {
  Arm arm = Arm::P1;
  /// Single-model arms: one report per seed. Ensemble arms: the fused report only.
  std::vector<MetricsReport> reports;
  /// Table row: mean over `reports`.
  double ema_f1 = 0.0;
  double emi_f1 = 0.0;
  double sma_f1 = 0.0;
  double smi_f1 = 0.0;
  std::vector<std::string> test_ids;
};

/// Mean SOD uncertainty of one model on in-domain validation frames and OOD test frames.
struct UncertaintySummary {
  std::uint64_t seed = 0;
  double tau = 0.0;
  double in_domain = 0.0;
  double out_of_domain = 0.0;
};

struct TrainRun {
  std::vector<TrainedModel> models;
  std::vector<std::string> checkpoints;
  std::vector<double> cpu_seconds;
};

struct CompareResult {
  std::vector<ArmResult> arms;  // P1, P2, P3, P4
  std::vector<UncertaintySummary> uncertainty;
  std::vector<double> cpu_seconds_per_model;
};

/// Materializes the synthetic split; returns the manifest path.
std::string cmd_synth(const ExperimentConfig& cfg, const std::string& out_dir);

/// Single-model arms train the first seed only; ensemble arms train `members` seeds.
TrainRun cmd_train(const ExperimentConfig& cfg, const std::string& manifest, const std::string& out_dir,
                   bool verbose = false);

/// Inference with the arm's checkpoints, fusion, post-processing and metrics.
ArmResult cmd_eval(const ExperimentConfig& cfg, const std::string& manifest, const std::string& checkpoint_dir,
                   const std::string& out_dir);

/// Evaluates posteriorgram files laid out as <dir>/m<k>/<clip>.pgm (k = 0..M-1) against the manifest's test clips.
ArmResult eval_posteriorgram_dir(const ExperimentConfig& cfg, const std::string& manifest, const std::string& dir);

/// The four arm presets derived from one config; each is validated.
std::map<Arm, ExperimentConfig> compare_arms(const ExperimentConfig& cfg);

/// Trains the tau = 0 and tau > 0 model sets once, then evaluates P1..P4 on the same test partition.
CompareResult cmd_compare(const ExperimentConfig& cfg, const std::string& manifest, const std::string& out_dir,
                          bool verbose = false);

/// Fusion + metrics for one arm from per-member posteriorgrams.
ArmResult evaluate_arm(Arm arm, const std::vector<ClipPosteriors>& members, const std::vector<ClipReference>& refs,
                       const ClassMap& classes, const ExperimentConfig& cfg);

ClipPosteriors infer(const ModelParams& p, const std::vector<Example>& clips);

double mean_uncertainty(const ClipPosteriors& posteriors);

std::string checkpoint_name(std::uint64_t seed);

void write_arm_csv(const std::string& path, const std::vector<ArmResult>& arms, bool with_relative_row);
std::string format_table(const std::vector<ArmResult>& arms, bool with_relative_row);
void write_uncertainty_csv(const std::string& path, const std::vector<UncertaintySummary>& rows);

/// Throws unless every arm scored the same test clip ids.
void require_same_test_partition(const std::vector<ArmResult>& arms);

/// (P4 - P1) / P1 for the four columns.
std::vector<double> relative_improvement(const ArmResult& baseline, const ArmResult& candidate);

}  // namespace eowsed

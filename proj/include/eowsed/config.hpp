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

// JSON mapping for every configuration section, plus the experiment config
// that ties them together.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eowsed/dataset.hpp"
#include "eowsed/eow.hpp"
#include "eowsed/features.hpp"
#include "eowsed/metrics.hpp"
#include "eowsed/model.hpp"
#include "eowsed/training.hpp"

namespace eowsed {

using Json = nlohmann::json;

enum class Arm { P1, P2, P3, P4 };
std::string to_string(Arm a);
Arm arm_from_string(const std::string& s);
inline bool arm_is_ensemble(Arm a) { return a == Arm::P3 || a == Arm::P4; }
inline bool arm_uses_open_loss(Arm a) { return a == Arm::P2 || a == Arm::P4; }

enum class Fusion { Average, Calibrated };

struct DatasetConfig {
  std::vector<SynthConfig> train_domains = default_train_domains();
  SynthConfig test_domain = default_test_domain();
  SplitSizes sizes;
  std::uint64_t seed = 2024;
};

struct EnsembleConfig {
  int members = 5;
  Fusion fusion = Fusion::Calibrated;
  /// Fixed interpolation weights for average fusion; empty means 1/M each.
  std::vector<double> weights;
};

struct ExperimentConfig {
  Arm arm = Arm::P4;
  FeatureConfig features;
  DatasetConfig dataset;
  ArchConfig arch;
  TrainConfig train;
  EnsembleConfig ensemble;
  EvalConfig metrics;

  /// Checks the arm constraints and every section. Throws ValidationError.
  void validate() const;
};

/// Rewrites tau / members / fusion to the arm's preset. `open_tau` is used for P2/P4.
ExperimentConfig with_arm(ExperimentConfig cfg, Arm arm, double open_tau);

Json to_json(const FeatureConfig& c);
Json to_json(const SynthConfig& c);
Json to_json(const ArchConfig& c);
Json to_json(const SgldConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const EvalConfig& c);
Json to_json(const ExperimentConfig& c);

ArchConfig arch_from_json(const Json& j);
SynthConfig synth_from_json(const Json& j, const SynthConfig& defaults);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& c);

void save_sgld_buffer(const std::string& path, const SgldBuffer& b);
SgldBuffer load_sgld_buffer(const std::string& path);

}  // namespace eowsed

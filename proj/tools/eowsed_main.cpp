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

// eowsed: synth | train | eval | compare.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure
// (non-finite loss, I/O).

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eowsed/experiment.hpp"

namespace {

using namespace eowsed;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arm;
};

ExperimentConfig resolve(const CommonArgs& a) {
  ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_experiment_config(a.config);
  if (a.arm) {
    const Arm arm = arm_from_string(*a.arm);
    const double open_tau = cfg.train.tau > 0.0 ? cfg.train.tau : 1.0;
    cfg = with_arm(cfg, arm, open_tau);
  }
  if (a.seed) {
    // One seed replaces the dataset seed and the first training seed.
    cfg.dataset.seed = *a.seed;
    if (!cfg.train.seeds.empty()) cfg.train.seeds.front() = *a.seed;
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_arm) {
  cmd->add_option("--config", a.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--seed", a.seed, "override the dataset seed and the first training seed");
  if (with_arm) cmd->add_option("--arm", a.arm, "P1 | P2 | P3 | P4");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sound event detection with open-world calibrated ensembles"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, eval_args, compare_args;
  std::string train_manifest, eval_manifest, eval_ckpt, eval_pgm, compare_manifest;
  bool verbose = false;

  auto* synth = app.add_subcommand("synth", "generate the synthetic two-domain dataset");
  add_common(synth, synth_args, false);

  auto* train = app.add_subcommand("train", "train the arm's model(s)");
  add_common(train, train_args, true);
  train->add_option("--manifest", train_manifest, "dataset manifest.json")->required()->check(CLI::ExistingFile);
  train->add_flag("-v,--verbose", verbose, "log every epoch");

  auto* eval = app.add_subcommand("eval", "fuse, post-process and score on the test partition");
  add_common(eval, eval_args, true);
  eval->add_option("--manifest", eval_manifest, "dataset manifest.json")->required()->check(CLI::ExistingFile);
  auto* ck = eval->add_option("--checkpoints", eval_ckpt, "directory with model_seed<k>.ckpt");
  auto* pg = eval->add_option("--posteriorgrams", eval_pgm, "directory laid out as m<k>/<clip>.pgm");
  ck->excludes(pg);

  auto* compare = app.add_subcommand("compare", "train and score P1..P4 on one dataset");
  add_common(compare, compare_args, false);
  compare->add_option("--manifest", compare_manifest, "dataset manifest.json (generated under --out if omitted)");
  compare->add_flag("-v,--verbose", verbose, "log every epoch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      const auto cfg = resolve(synth_args);
      std::cout << cmd_synth(cfg, synth_args.out) << '\n';
    } else if (*train) {
      const auto cfg = resolve(train_args);
      const auto run = cmd_train(cfg, train_manifest, train_args.out, verbose);
      for (std::size_t k = 0; k < run.checkpoints.size(); ++k) {
        std::cout << run.checkpoints[k] << "  (best epoch " << run.models[k].best_epoch << ", "
                  << run.cpu_seconds[k] << " s CPU)\n";
      }
    } else if (*eval) {
      const auto cfg = resolve(eval_args);
      if (eval_ckpt.empty() == eval_pgm.empty()) fail("eval needs exactly one of --checkpoints or --posteriorgrams");
      ArmResult r;
      if (!eval_ckpt.empty()) {
        r = cmd_eval(cfg, eval_manifest, eval_ckpt, eval_args.out);
      } else {
        r = eval_posteriorgram_dir(cfg, eval_manifest, eval_pgm);
        std::filesystem::create_directories(eval_args.out);
        write_arm_csv((std::filesystem::path(eval_args.out) / "metrics.csv").string(), {r}, false);
      }
      std::cout << format_table({r}, false);
    } else if (*compare) {
      const auto cfg = resolve(compare_args);
      std::string manifest = compare_manifest;
      if (manifest.empty()) {
        manifest = cmd_synth(compare_arms(cfg).at(Arm::P4), (std::filesystem::path(compare_args.out) / "data").string());
      }
      const auto r = cmd_compare(cfg, manifest, compare_args.out, verbose);
      std::cout << format_table(r.arms, true);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const RuntimeAbort& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

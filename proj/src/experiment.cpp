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

#include "eowsed/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace eowsed {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, int decimals = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::vector<std::uint64_t> arm_seeds(const ExperimentConfig& cfg) {
  const std::size_t m = arm_is_ensemble(cfg.arm) ? static_cast<std::size_t>(cfg.ensemble.members) : 1;
  return {cfg.train.seeds.begin(), cfg.train.seeds.begin() + static_cast<std::ptrdiff_t>(m)};
}

std::vector<ClipReference> references(const std::vector<Example>& clips) {
  std::vector<ClipReference> refs;
  for (const auto& e : clips) refs.push_back({e.id, e.events});
  return refs;
}

void set_row_means(ArmResult& r) {
  const double n = static_cast<double>(r.reports.size());
  r.ema_f1 = r.emi_f1 = r.sma_f1 = r.smi_f1 = 0.0;
  for (const auto& rep : r.reports) {
    r.ema_f1 += rep.ema_f1 / n;
    r.emi_f1 += rep.emi_f1 / n;
    r.sma_f1 += rep.sma_f1 / n;
    r.smi_f1 += rep.smi_f1 / n;
  }
}

std::string arm_label(Arm a) {
  switch (a) {
    case Arm::P1: return "CRNN";
    case Arm::P2: return "CRNN + open-world SOD head";
    case Arm::P3: return "CRNN ensemble, average fusion";
    case Arm::P4: return "Open-world ensemble, calibrated fusion";
  }
  return "";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw RuntimeAbort("cannot write " + path);
  out << text;
}

struct LoadedData {
  ClassMap classes;
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
};

LoadedData load_examples(const ExperimentConfig& cfg, const std::string& manifest, bool need_train) {
  const DatasetSplit split = load_dataset(manifest);
  require(split.class_map.size() == cfg.arch.n_classes,
          "dataset has " + std::to_string(split.class_map.size()) + " classes, arch expects " +
              std::to_string(cfg.arch.n_classes));
  LoadedData d;
  d.classes = split.class_map;
  if (need_train) d.train = make_examples(split.train, cfg.features, d.classes);
  d.validation = make_examples(split.validation, cfg.features, d.classes);
  d.test = make_examples(split.test, cfg.features, d.classes);
  return d;
}

}  // namespace

std::string checkpoint_name(std::uint64_t seed) { return "model_seed" + std::to_string(seed) + ".ckpt"; }

std::string cmd_synth(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const auto split = make_split(cfg.dataset.train_domains, cfg.dataset.test_domain, cfg.dataset.sizes, cfg.dataset.seed);
  const auto manifest = write_dataset(split, out_dir);
  save_experiment_config((fs::path(out_dir) / "config.json").string(), cfg);
  return manifest;
}

TrainRun cmd_train(const ExperimentConfig& cfg, const std::string& manifest, const std::string& out_dir, bool verbose) {
  cfg.validate();
  const auto data = load_examples(cfg, manifest, true);
  require(!data.train.empty() && !data.validation.empty(), "manifest has an empty train or validation partition");
  fs::create_directories(out_dir);
  save_experiment_config((fs::path(out_dir) / "config.json").string(), cfg);

  TrainRun run;
  EpochCallback log;
  if (verbose) {
    log = [](std::uint64_t seed, const EpochRecord& r) {
      std::cerr << "seed " << seed << " epoch " << r.epoch << " lr " << r.lr << " train " << r.train.total << " val "
                << r.validation.total << " (bce " << r.validation.bce << ", mll " << r.validation.mll << ", open "
                << r.validation.open << ")\n";
    };
  }
  for (auto seed : arm_seeds(cfg)) {
    const std::clock_t start = std::clock();
    auto model = train_model(data.train, data.validation, cfg.arch, cfg.train, seed, log);
    run.cpu_seconds.push_back(static_cast<double>(std::clock() - start) / CLOCKS_PER_SEC);
    const auto ckpt = (fs::path(out_dir) / checkpoint_name(seed)).string();
    save_checkpoint(ckpt, model.params);
    write_history_csv((fs::path(out_dir) / ("history_seed" + std::to_string(seed) + ".csv")).string(), model.history);
    if (model.buffer.initialized()) {
      save_sgld_buffer((fs::path(out_dir) / ("sgld_seed" + std::to_string(seed) + ".bin")).string(), model.buffer);
    }
    run.checkpoints.push_back(ckpt);
    run.models.push_back(std::move(model));
  }
  return run;
}

ClipPosteriors infer(const ModelParams& p, const std::vector<Example>& clips) {
  ClipPosteriors out;
  for (const auto& e : clips) out.emplace(e.id, predict(p, e.data.features));
  return out;
}

double mean_uncertainty(const ClipPosteriors& posteriors) {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (const auto& [_, pg] : posteriors) {
    sum += pg.sod.col(kUncertaintyIndex).sum();
    n += pg.sod.rows();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

ArmResult evaluate_arm(Arm arm, const std::vector<ClipPosteriors>& members, const std::vector<ClipReference>& refs,
                       const ClassMap& classes, const ExperimentConfig& cfg) {
  require(!members.empty(), "evaluate_arm: no member posteriorgrams");
  ArmResult r;
  r.arm = arm;
  for (const auto& ref : refs) r.test_ids.push_back(ref.id);
  auto member_for = [&](const ClipPosteriors& m, const std::string& id) -> const Posteriorgram& {
    const auto it = m.find(id);
    if (it == m.end()) fail("no posteriorgram for test clip '" + id + "'");
    return it->second;
  };

  if (!arm_is_ensemble(arm)) {
    for (const auto& m : members) {
      std::map<std::string, FusedPrediction> preds;
      for (const auto& ref : refs) {
        const auto& pg = member_for(m, ref.id);
        preds.emplace(ref.id, FusedPrediction{pg.sed, pg.hop_seconds});
      }
      r.reports.push_back(evaluate_clipset(refs, preds, classes, cfg.metrics));
    }
  } else {
    std::map<std::string, FusedPrediction> preds;
    for (const auto& ref : refs) {
      std::vector<Posteriorgram> pgs;
      for (const auto& m : members) pgs.push_back(member_for(m, ref.id));
      if (arm == Arm::P4) {
        std::vector<Vector> confs;
        for (const auto& pg : pgs) confs.push_back(frame_confidence(pg.sod));
        preds.emplace(ref.id, fuse_calibrated(pgs, confs));
      } else {
        preds.emplace(ref.id, cfg.ensemble.weights.empty() ? fuse_average(pgs) : fuse_average(pgs, cfg.ensemble.weights));
      }
    }
    r.reports.push_back(evaluate_clipset(refs, preds, classes, cfg.metrics));
  }
  set_row_means(r);
  return r;
}

ArmResult eval_posteriorgram_dir(const ExperimentConfig& cfg, const std::string& manifest, const std::string& dir) {
  cfg.validate();
  const Manifest m = read_manifest(manifest);
  const ClassMap classes(m.classes);
  const fs::path root = fs::path(manifest).parent_path();
  std::vector<ClipReference> refs;
  for (const auto& e : m.clips) {
    if (e.partition != "test") continue;
    std::ifstream tsv(root / e.annotation);
    if (!tsv) throw RuntimeAbort("cannot read " + (root / e.annotation).string());
    std::stringstream buf;
    buf << tsv.rdbuf();
    refs.push_back({e.id, parse_annotations(buf.str(), e.id, e.duration)});
  }
  const int M = arm_is_ensemble(cfg.arm) ? cfg.ensemble.members : 1;
  std::vector<ClipPosteriors> members(static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) {
    for (const auto& ref : refs) {
      const auto path = fs::path(dir) / ("m" + std::to_string(k)) / (ref.id + ".pgm");
      if (!fs::exists(path)) fail("missing posteriorgram for clip '" + ref.id + "': " + path.string());
      members[static_cast<std::size_t>(k)].emplace(ref.id, read_posteriorgram(path.string()));
    }
  }
  return evaluate_arm(cfg.arm, members, refs, classes, cfg);
}

ArmResult cmd_eval(const ExperimentConfig& cfg, const std::string& manifest, const std::string& checkpoint_dir,
                   const std::string& out_dir) {
  cfg.validate();
  const auto seeds = arm_seeds(cfg);
  std::vector<ModelParams> models;
  for (auto seed : seeds) {
    const auto path = (fs::path(checkpoint_dir) / checkpoint_name(seed)).string();
    if (!fs::exists(path)) fail("missing checkpoint for seed " + std::to_string(seed) + ": " + path);
    auto p = load_checkpoint(path);
    if (!(p.arch == cfg.arch)) fail("checkpoint " + path + " was trained with a different architecture than the config");
    models.push_back(std::move(p));
  }
  const auto data = load_examples(cfg, manifest, false);
  fs::create_directories(out_dir);

  std::vector<UncertaintySummary> unc;
  const fs::path pg_dir = fs::path(out_dir) / "posteriorgrams";
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto test = infer(models[k], data.test);
    const auto val = infer(models[k], data.validation);
    unc.push_back({seeds[k], cfg.train.tau, mean_uncertainty(val), mean_uncertainty(test)});
    fs::create_directories(pg_dir / ("m" + std::to_string(k)));
    for (const auto& [id, pg] : test) write_posteriorgram((pg_dir / ("m" + std::to_string(k)) / (id + ".pgm")).string(), pg);
  }
  auto result = eval_posteriorgram_dir(cfg, manifest, pg_dir.string());
  write_arm_csv((fs::path(out_dir) / "metrics.csv").string(), {result}, false);
  write_text((fs::path(out_dir) / "report.txt").string(), format_table({result}, false));
  write_uncertainty_csv((fs::path(out_dir) / "uncertainty.csv").string(), unc);
  return result;
}

std::map<Arm, ExperimentConfig> compare_arms(const ExperimentConfig& cfg) {
  const double open_tau = cfg.train.tau > 0.0 ? cfg.train.tau : 1.0;
  ExperimentConfig base = cfg;
  if (base.ensemble.members < 2) base.ensemble.members = static_cast<int>(base.train.seeds.size());
  std::map<Arm, ExperimentConfig> arms;
  for (Arm a : {Arm::P1, Arm::P2, Arm::P3, Arm::P4}) {
    arms[a] = with_arm(base, a, open_tau);
    arms[a].validate();
  }
  return arms;
}

CompareResult cmd_compare(const ExperimentConfig& cfg, const std::string& manifest, const std::string& out_dir,
                          bool verbose) {
  auto arms = compare_arms(cfg);
  const double open_tau = arms[Arm::P4].train.tau;
  const ExperimentConfig& base = arms[Arm::P4];

  fs::create_directories(out_dir);
  const auto baseline_dir = (fs::path(out_dir) / "models_baseline").string();
  const auto open_dir = (fs::path(out_dir) / "models_open").string();
  if (verbose) std::cerr << "training tau = 0 models\n";
  auto baseline = cmd_train(arms[Arm::P3], manifest, baseline_dir, verbose);
  if (verbose) std::cerr << "training tau = " << open_tau << " models\n";
  auto open = cmd_train(arms[Arm::P4], manifest, open_dir, verbose);

  const auto data = load_examples(base, manifest, false);
  const auto refs = references(data.test);

  CompareResult result;
  std::vector<ClipPosteriors> base_post, open_post;
  auto collect = [&](const TrainRun& run, double tau, std::vector<ClipPosteriors>& dst) {
    for (std::size_t k = 0; k < run.models.size(); ++k) {
      dst.push_back(infer(run.models[k].params, data.test));
      const auto val = infer(run.models[k].params, data.validation);
      result.uncertainty.push_back({run.models[k].seed, tau, mean_uncertainty(val), mean_uncertainty(dst.back())});
      result.cpu_seconds_per_model.push_back(run.cpu_seconds[k]);
    }
  };
  collect(baseline, 0.0, base_post);
  collect(open, open_tau, open_post);

  result.arms.push_back(evaluate_arm(Arm::P1, base_post, refs, data.classes, arms[Arm::P1]));
  result.arms.push_back(evaluate_arm(Arm::P2, open_post, refs, data.classes, arms[Arm::P2]));
  result.arms.push_back(evaluate_arm(Arm::P3, base_post, refs, data.classes, arms[Arm::P3]));
  result.arms.push_back(evaluate_arm(Arm::P4, open_post, refs, data.classes, arms[Arm::P4]));
  require_same_test_partition(result.arms);

  write_arm_csv((fs::path(out_dir) / "compare.csv").string(), result.arms, true);
  write_text((fs::path(out_dir) / "compare.txt").string(), format_table(result.arms, true));
  write_uncertainty_csv((fs::path(out_dir) / "uncertainty.csv").string(), result.uncertainty);
  {
    std::ofstream per_seed(fs::path(out_dir) / "per_seed.csv");
    if (!per_seed) throw RuntimeAbort("cannot write per_seed.csv");
    per_seed << "id,seed,ema_f1,emi_f1,sma_f1,smi_f1\n";
    for (const auto& a : result.arms) {
      if (arm_is_ensemble(a.arm)) continue;
      const auto& run = a.arm == Arm::P1 ? baseline : open;
      for (std::size_t k = 0; k < a.reports.size(); ++k) {
        const auto& r = a.reports[k];
        per_seed << to_string(a.arm) << ',' << run.models[k].seed << ',' << fmt(r.ema_f1) << ',' << fmt(r.emi_f1)
                 << ',' << fmt(r.sma_f1) << ',' << fmt(r.smi_f1) << '\n';
      }
    }
  }
  return result;
}

void require_same_test_partition(const std::vector<ArmResult>& arms) {
  for (const auto& a : arms) {
    if (a.test_ids != arms.front().test_ids) {
      fail("compare: " + to_string(a.arm) + " was evaluated on a different test partition than " +
           to_string(arms.front().arm));
    }
  }
}

std::vector<double> relative_improvement(const ArmResult& baseline, const ArmResult& candidate) {
  auto rel = [](double a, double b) { return a == 0.0 ? std::nan("") : (b - a) / a; };
  return {rel(baseline.ema_f1, candidate.ema_f1), rel(baseline.emi_f1, candidate.emi_f1),
          rel(baseline.sma_f1, candidate.sma_f1), rel(baseline.smi_f1, candidate.smi_f1)};
}

namespace {

const ArmResult* find_arm(const std::vector<ArmResult>& arms, Arm a) {
  for (const auto& r : arms) {
    if (r.arm == a) return &r;
  }
  return nullptr;
}

}  // namespace

void write_arm_csv(const std::string& path, const std::vector<ArmResult>& arms, bool with_relative_row) {
  std::ofstream out(path);
  if (!out) throw RuntimeAbort("cannot write " + path);
  out << "id,ema_f1,emi_f1,sma_f1,smi_f1\n";
  for (const auto& a : arms) {
    out << to_string(a.arm) << ',' << fmt(a.ema_f1) << ',' << fmt(a.emi_f1) << ',' << fmt(a.sma_f1) << ','
        << fmt(a.smi_f1) << '\n';
  }
  const auto* p1 = find_arm(arms, Arm::P1);
  const auto* p4 = find_arm(arms, Arm::P4);
  if (with_relative_row && p1 && p4) {
    const auto rel = relative_improvement(*p1, *p4);
    out << "P4_vs_P1";
    for (double v : rel) out << ',' << fmt(v);
    out << '\n';
  }
}

std::string format_table(const std::vector<ArmResult>& arms, bool with_relative_row) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s | %-40s | %9s | %9s | %9s | %9s\n", "ID", "Model", "Ema-F1 %", "Emi-F1 %",
                "Sma-F1 %", "Smi-F1 %");
  out << line << std::string(95, '-') << '\n';
  for (const auto& a : arms) {
    std::snprintf(line, sizeof line, "%-4s | %-40s | %9s | %9s | %9s | %9s\n", to_string(a.arm).c_str(),
                  arm_label(a.arm).c_str(), fmt(100.0 * a.ema_f1, 2).c_str(), fmt(100.0 * a.emi_f1, 2).c_str(),
                  fmt(100.0 * a.sma_f1, 2).c_str(), fmt(100.0 * a.smi_f1, 2).c_str());
    out << line;
  }
  const auto* p1 = find_arm(arms, Arm::P1);
  const auto* p4 = find_arm(arms, Arm::P4);
  if (with_relative_row && p1 && p4) {
    const auto rel = relative_improvement(*p1, *p4);
    std::snprintf(line, sizeof line, "%-4s | %-40s | %9s | %9s | %9s | %9s\n", "", "P4 over P1 (relative %)",
                  fmt(100.0 * rel[0], 2).c_str(), fmt(100.0 * rel[1], 2).c_str(), fmt(100.0 * rel[2], 2).c_str(),
                  fmt(100.0 * rel[3], 2).c_str());
    out << std::string(95, '-') << '\n' << line;
  }
  return out.str();
}

void write_uncertainty_csv(const std::string& path, const std::vector<UncertaintySummary>& rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeAbort("cannot write " + path);
  out << "seed,tau,in_domain_mean_uncertainty,ood_mean_uncertainty\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << fmt(r.tau) << ',' << fmt(r.in_domain, 9) << ',' << fmt(r.out_of_domain, 9) << '\n';
  }
}

}  // namespace eowsed

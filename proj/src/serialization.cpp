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

#include <fstream>
#include <initializer_list>

#include "binary_io.hpp"
#include "eowsed/config.hpp"

namespace eowsed {

namespace {

constexpr char kCheckpointMagic[8] = {'E', 'O', 'W', 'S', 'E', 'D', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) fail("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail("config section '" + section + "': unknown key '" + key + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

Json to_json(const ClassPrototype& p) {
  return {{"name", p.name},       {"carrier", to_string(p.carrier)}, {"freq_lo", p.freq_lo}, {"freq_hi", p.freq_hi},
          {"dur_min", p.dur_min}, {"dur_max", p.dur_max},            {"weight", p.weight}};
}

ClassPrototype prototype_from_json(const Json& j) {
  check_keys(j, {"name", "carrier", "freq_lo", "freq_hi", "dur_min", "dur_max", "weight"}, "class prototype");
  ClassPrototype p;
  read(j, "name", p.name);
  if (j.contains("carrier")) p.carrier = carrier_from_string(j.at("carrier").get<std::string>());
  read(j, "freq_lo", p.freq_lo);
  read(j, "freq_hi", p.freq_hi);
  read(j, "dur_min", p.dur_min);
  read(j, "dur_max", p.dur_max);
  read(j, "weight", p.weight);
  return p;
}

SgldConfig sgld_from_json(const Json& j, SgldConfig c) {
  check_keys(j, {"n_steps", "step_size", "noise_scale", "buffer_size", "reinit_prob", "gamma", "negatives"}, "eow.sgld");
  read(j, "n_steps", c.n_steps);
  read(j, "step_size", c.step_size);
  read(j, "noise_scale", c.noise_scale);
  read(j, "buffer_size", c.buffer_size);
  read(j, "reinit_prob", c.reinit_prob);
  read(j, "gamma", c.gamma);
  if (j.contains("negatives")) {
    const auto s = j.at("negatives").get<std::string>();
    if (s == "sgld") {
      c.source = NegativeSource::Sgld;
    } else if (s == "gaussian") {
      c.source = NegativeSource::Gaussian;
    } else {
      fail("eow.sgld.negatives must be 'sgld' or 'gaussian'");
    }
  }
  return c;
}

}  // namespace

std::string to_string(Arm a) {
  switch (a) {
    case Arm::P1: return "P1";
    case Arm::P2: return "P2";
    case Arm::P3: return "P3";
    case Arm::P4: return "P4";
  }
  return "P1";
}

Arm arm_from_string(const std::string& s) {
  if (s == "P1") return Arm::P1;
  if (s == "P2") return Arm::P2;
  if (s == "P3") return Arm::P3;
  if (s == "P4") return Arm::P4;
  fail("unknown arm '" + s + "' (expected P1, P2, P3 or P4)");
}

void ExperimentConfig::validate() const {
  features.validate();
  arch.validate();
  train.validate();
  require(arch.n_mels == features.n_mels, "config: arch.n_mels must equal features.n_mels");
  require(dataset.train_domains.size() >= 1, "config: need at least one training domain");
  for (const auto& d : dataset.train_domains) {
    d.validate();
    require(d.sample_rate == features.sample_rate, "config: synth sample rate differs from feature sample rate");
  }
  dataset.test_domain.validate();
  require(arch.n_classes == dataset.test_domain.class_map().size(), "config: arch.n_classes must match the target class list");
  require(metrics.threshold > 0.0 && metrics.threshold < 1.0, "config: metrics.threshold must lie in (0,1)");
  require(metrics.median_window >= 1 && metrics.median_window % 2 == 1, "config: metrics.median_window must be odd");
  require(metrics.segment_frames >= 1, "config: metrics.segment_frames must be positive");
  require(ensemble.weights.empty() || static_cast<int>(ensemble.weights.size()) == ensemble.members,
          "config: ensemble.weights must have one entry per member");
  require(static_cast<int>(train.seeds.size()) >= ensemble.members, "config: fewer train.seeds than ensemble members");

  const std::string arm_name = to_string(arm);
  if (arm_uses_open_loss(arm)) {
    require(train.tau > 0.0, "config: arm " + arm_name + " requires tau > 0");
  } else {
    require(train.tau == 0.0, "config: arm " + arm_name + " requires tau = 0");
  }
  if (arm_is_ensemble(arm)) {
    require(ensemble.members >= 2, "config: arm " + arm_name + " is an ensemble arm (members >= 2, default 5)");
    require(ensemble.fusion == (arm == Arm::P4 ? Fusion::Calibrated : Fusion::Average),
            "config: arm " + arm_name + " requires " + (arm == Arm::P4 ? "calibrated" : "average") + " fusion");
  } else {
    require(ensemble.members == 1, "config: arm " + arm_name + " is a single-model arm (members = 1)");
  }
}

ExperimentConfig with_arm(ExperimentConfig cfg, Arm arm, double open_tau) {
  cfg.arm = arm;
  cfg.train.tau = arm_uses_open_loss(arm) ? open_tau : 0.0;
  if (arm_is_ensemble(arm)) {
    if (cfg.ensemble.members < 2) cfg.ensemble.members = static_cast<int>(cfg.train.seeds.size());
    cfg.ensemble.fusion = arm == Arm::P4 ? Fusion::Calibrated : Fusion::Average;
  } else {
    cfg.ensemble.members = 1;
    cfg.ensemble.weights.clear();
  }
  return cfg;
}

Json to_json(const FeatureConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"frame_len_ms", c.frame_len_ms}, {"hop_ms", c.hop_ms},
          {"n_mels", c.n_mels},           {"fmin", c.fmin},                 {"fmax", c.fmax},
          {"log_floor", c.log_floor},     {"standardize", c.standardize}};
}

Json to_json(const SynthConfig& c) {
  Json targets = Json::array(), distractors = Json::array();
  for (const auto& p : c.targets) targets.push_back(to_json(p));
  for (const auto& p : c.distractors) distractors.push_back(to_json(p));
  return {{"name", c.name},
          {"clip_seconds", c.clip_seconds},
          {"sample_rate", c.sample_rate},
          {"color_exponent", c.color_exponent},
          {"background_level_db", c.background_level_db},
          {"snr_min_db", c.snr_min_db},
          {"snr_max_db", c.snr_max_db},
          {"snr_shift_db", c.snr_shift_db},
          {"polyphony_rate", c.polyphony_rate},
          {"events_min", c.events_min},
          {"events_max", c.events_max},
          {"distractors_min", c.distractors_min},
          {"distractors_max", c.distractors_max},
          {"targets", targets},
          {"distractors", distractors},
          {"seed", c.seed}};
}

SynthConfig synth_from_json(const Json& j, const SynthConfig& defaults) {
  check_keys(j,
             {"name", "clip_seconds", "sample_rate", "color_exponent", "background_level_db", "snr_min_db", "snr_max_db",
              "snr_shift_db", "polyphony_rate", "events_min", "events_max", "distractors_min", "distractors_max",
              "targets", "distractors", "seed"},
             "synth domain");
  SynthConfig c = defaults;
  read(j, "name", c.name);
  read(j, "clip_seconds", c.clip_seconds);
  read(j, "sample_rate", c.sample_rate);
  read(j, "color_exponent", c.color_exponent);
  read(j, "background_level_db", c.background_level_db);
  read(j, "snr_min_db", c.snr_min_db);
  read(j, "snr_max_db", c.snr_max_db);
  read(j, "snr_shift_db", c.snr_shift_db);
  read(j, "polyphony_rate", c.polyphony_rate);
  read(j, "events_min", c.events_min);
  read(j, "events_max", c.events_max);
  read(j, "distractors_min", c.distractors_min);
  read(j, "distractors_max", c.distractors_max);
  read(j, "seed", c.seed);
  if (j.contains("targets")) {
    c.targets.clear();
    for (const auto& p : j.at("targets")) c.targets.push_back(prototype_from_json(p));
  }
  if (j.contains("distractors")) {
    c.distractors.clear();
    for (const auto& p : j.at("distractors")) c.distractors.push_back(prototype_from_json(p));
  }
  return c;
}

Json to_json(const ArchConfig& c) {
  Json blocks = Json::array();
  for (const auto& b : c.conv_blocks) blocks.push_back({{"out_channels", b.out_channels}, {"freq_pool", b.freq_pool}});
  return {{"n_mels", c.n_mels},         {"conv_blocks", blocks},   {"gru_layers", c.gru_layers},
          {"gru_hidden", c.gru_hidden}, {"n_classes", c.n_classes}, {"sod_classes", c.sod_classes}};
}

ArchConfig arch_from_json(const Json& j) {
  check_keys(j, {"n_mels", "conv_blocks", "gru_layers", "gru_hidden", "n_classes", "sod_classes"}, "arch");
  ArchConfig c;
  read(j, "n_mels", c.n_mels);
  if (j.contains("conv_blocks")) {
    c.conv_blocks.clear();
    for (const auto& b : j.at("conv_blocks")) {
      check_keys(b, {"out_channels", "freq_pool"}, "arch.conv_blocks");
      c.conv_blocks.push_back({b.at("out_channels").get<int>(), b.at("freq_pool").get<int>()});
    }
  }
  read(j, "gru_layers", c.gru_layers);
  read(j, "gru_hidden", c.gru_hidden);
  read(j, "n_classes", c.n_classes);
  read(j, "sod_classes", c.sod_classes);
  return c;
}

Json to_json(const SgldConfig& c) {
  return {{"n_steps", c.n_steps},
          {"step_size", c.step_size},
          {"noise_scale", c.noise_scale},
          {"buffer_size", c.buffer_size},
          {"reinit_prob", c.reinit_prob},
          {"gamma", c.gamma},
          {"negatives", c.source == NegativeSource::Sgld ? "sgld" : "gaussian"}};
}

Json to_json(const TrainConfig& c) {
  return {{"tau", c.tau},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"warmup_epochs", c.warmup_epochs},
          {"patience", c.patience},
          {"seeds", c.seeds},
          {"mixup", c.mixup},
          {"mixup_alpha", c.mixup_alpha},
          {"mixup_beta", c.mixup_beta},
          {"threads", c.threads}};
}

Json to_json(const EvalConfig& c) {
  return {{"threshold", c.threshold},
          {"median_window", c.median_window},
          {"segment_frames", c.segment_frames},
          {"onset_collar", c.collars.onset},
          {"offset_collar_min", c.collars.offset_min},
          {"offset_collar_fraction", c.collars.offset_fraction}};
}

Json to_json(const ExperimentConfig& c) {
  Json train_domains = Json::array();
  for (const auto& d : c.dataset.train_domains) train_domains.push_back(to_json(d));
  Json j;
  j["arm"] = to_string(c.arm);
  j["features"] = to_json(c.features);
  j["synth"] = {{"train_domains", train_domains},
                {"test_domain", to_json(c.dataset.test_domain)},
                {"clips_per_train_domain", c.dataset.sizes.clips_per_train_domain},
                {"test_clips", c.dataset.sizes.test_clips},
                {"validation_fraction", c.dataset.sizes.validation_fraction},
                {"seed", c.dataset.seed}};
  j["arch"] = to_json(c.arch);
  j["train"] = to_json(c.train);
  j["eow"] = {{"lambda", c.train.lambda},
              {"negatives_per_batch", c.train.negatives_per_batch},
              {"sgld", to_json(c.train.sgld)}};
  j["ensemble"] = {{"members", c.ensemble.members},
                   {"fusion", c.ensemble.fusion == Fusion::Calibrated ? "calibrated" : "average"},
                   {"weights", c.ensemble.weights}};
  j["metrics"] = to_json(c.metrics);
  return j;
}

ExperimentConfig experiment_from_json(const Json& j) {
  try {
    check_keys(j, {"arm", "features", "synth", "arch", "train", "eow", "ensemble", "metrics"}, "top level");
    ExperimentConfig c;
    if (j.contains("arm")) c.arm = arm_from_string(j.at("arm").get<std::string>());
    if (j.contains("features")) {
      const auto& f = j.at("features");
      check_keys(f, {"sample_rate", "frame_len_ms", "hop_ms", "n_mels", "fmin", "fmax", "log_floor", "standardize"},
                 "features");
      read(f, "sample_rate", c.features.sample_rate);
      read(f, "frame_len_ms", c.features.frame_len_ms);
      read(f, "hop_ms", c.features.hop_ms);
      read(f, "n_mels", c.features.n_mels);
      read(f, "fmin", c.features.fmin);
      read(f, "fmax", c.features.fmax);
      read(f, "log_floor", c.features.log_floor);
      read(f, "standardize", c.features.standardize);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      check_keys(s, {"train_domains", "test_domain", "clips_per_train_domain", "test_clips", "validation_fraction", "seed"},
                 "synth");
      if (s.contains("train_domains")) {
        const auto defaults = default_train_domains();
        c.dataset.train_domains.clear();
        std::size_t i = 0;
        for (const auto& d : s.at("train_domains")) {
          c.dataset.train_domains.push_back(synth_from_json(d, defaults[std::min(i, defaults.size() - 1)]));
          ++i;
        }
      }
      if (s.contains("test_domain")) c.dataset.test_domain = synth_from_json(s.at("test_domain"), default_test_domain());
      read(s, "clips_per_train_domain", c.dataset.sizes.clips_per_train_domain);
      read(s, "test_clips", c.dataset.sizes.test_clips);
      read(s, "validation_fraction", c.dataset.sizes.validation_fraction);
      read(s, "seed", c.dataset.seed);
    }
    if (j.contains("arch")) c.arch = arch_from_json(j.at("arch"));
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t,
                 {"tau", "lr", "batch_size", "max_epochs", "warmup_epochs", "patience", "seeds", "mixup", "mixup_alpha",
                  "mixup_beta", "threads"},
                 "train");
      read(t, "tau", c.train.tau);
      read(t, "lr", c.train.lr);
      read(t, "batch_size", c.train.batch_size);
      read(t, "max_epochs", c.train.max_epochs);
      read(t, "warmup_epochs", c.train.warmup_epochs);
      read(t, "patience", c.train.patience);
      read(t, "seeds", c.train.seeds);
      read(t, "mixup", c.train.mixup);
      read(t, "mixup_alpha", c.train.mixup_alpha);
      read(t, "mixup_beta", c.train.mixup_beta);
      read(t, "threads", c.train.threads);
    }
    if (j.contains("eow")) {
      const auto& e = j.at("eow");
      check_keys(e, {"lambda", "negatives_per_batch", "sgld"}, "eow");
      read(e, "lambda", c.train.lambda);
      read(e, "negatives_per_batch", c.train.negatives_per_batch);
      if (e.contains("sgld")) c.train.sgld = sgld_from_json(e.at("sgld"), c.train.sgld);
    }
    if (j.contains("ensemble")) {
      const auto& e = j.at("ensemble");
      check_keys(e, {"members", "fusion", "weights"}, "ensemble");
      read(e, "members", c.ensemble.members);
      read(e, "weights", c.ensemble.weights);
      if (e.contains("fusion")) {
        const auto s = e.at("fusion").get<std::string>();
        if (s == "calibrated") {
          c.ensemble.fusion = Fusion::Calibrated;
        } else if (s == "average") {
          c.ensemble.fusion = Fusion::Average;
        } else {
          fail("ensemble.fusion must be 'calibrated' or 'average'");
        }
      }
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      check_keys(m,
                 {"threshold", "median_window", "segment_frames", "onset_collar", "offset_collar_min",
                  "offset_collar_fraction"},
                 "metrics");
      read(m, "threshold", c.metrics.threshold);
      read(m, "median_window", c.metrics.median_window);
      read(m, "segment_frames", c.metrics.segment_frames);
      read(m, "onset_collar", c.metrics.collars.onset);
      read(m, "offset_collar_min", c.metrics.collars.offset_min);
      read(m, "offset_collar_fraction", c.metrics.collars.offset_fraction);
    }
    return c;
  } catch (const Json::exception& e) {
    fail(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail("config " + path + " is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

void save_experiment_config(const std::string& path, const ExperimentConfig& c) {
  std::ofstream out(path);
  if (!out) throw RuntimeAbort("cannot write " + path);
  out << to_json(c).dump(2) << '\n';
}

void save_checkpoint(const std::string& path, const ModelParams& p) {
  const std::string header = to_json(p.arch).dump();
  auto out = detail::open_out(path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(p.values.size()));
  detail::put_doubles(out, p.values.data(), static_cast<std::size_t>(p.values.size()));
  if (!out) throw RuntimeAbort("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  auto in = detail::open_in(path);
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kCheckpointMagic)) fail("not a checkpoint file: " + path);
  const auto version = detail::get<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) fail("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const auto len = detail::get<std::uint64_t>(in, "checkpoint header");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) fail("truncated checkpoint header: " + path);
  ModelParams p;
  try {
    p.arch = arch_from_json(Json::parse(header));
  } catch (const Json::exception& e) {
    fail("corrupt checkpoint header in " + path + ": " + e.what());
  }
  const auto n = detail::get<std::uint64_t>(in, "parameter count");
  const ParamLayout layout(p.arch);
  if (static_cast<Eigen::Index>(n) != layout.total()) {
    fail("checkpoint " + path + " holds " + std::to_string(n) + " parameters, architecture needs " +
         std::to_string(layout.total()));
  }
  p.values.resize(static_cast<Eigen::Index>(n));
  detail::get_doubles(in, p.values.data(), n, "parameters");
  return p;
}

void save_sgld_buffer(const std::string& path, const SgldBuffer& b) {
  auto out = detail::open_out(path);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(b.samples.rows()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(b.samples.cols()));
  const RowMajorMatrix rm = b.samples;
  detail::put_doubles(out, rm.data(), static_cast<std::size_t>(rm.size()));
  if (!out) throw RuntimeAbort("write failed: " + path);
}

SgldBuffer load_sgld_buffer(const std::string& path) {
  auto in = detail::open_in(path);
  const auto rows = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in, "buffer header"));
  const auto cols = static_cast<Eigen::Index>(detail::get<std::uint64_t>(in, "buffer header"));
  RowMajorMatrix rm(rows, cols);
  detail::get_doubles(in, rm.data(), static_cast<std::size_t>(rm.size()), "buffer samples");
  SgldBuffer b;
  b.samples = rm;
  return b;
}

}  // namespace eowsed

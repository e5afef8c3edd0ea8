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
#include <random>
#include <string>
#include <vector>

#include "eowsed/annotations.hpp"
#include "eowsed/features.hpp"

namespace eowsed {

// ---------------------------------------------------------------------------
// Annotations and frame targets

/// Parses "onset<TAB>offset<TAB>label" lines. Blank lines are skipped.
EventList parse_annotations(const std::string& text, const std::string& clip_id = {}, double duration = 0.0);
std::string format_annotations(const EventList& events);

/// Cell (t, c) is 1 iff an event of class c overlaps [t*hop, (t+1)*hop).
/// Labels outside the class map are ignored.
SedTargets rasterize_labels(const EventList& events, int frames, double hop_seconds, const ClassMap& class_map);

/// Tolerance used when comparing event boundaries to frame edges.
inline constexpr double kFrameEdgeTolerance = 1e-9;

/// Per frame: min(number of active classes, 2). Rejects soft targets.
SodTargets derive_sod_targets(const SedTargets& sed);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class Carrier { Tone, Chirp, NoiseBurst, AmTone };

std::string to_string(Carrier c);
Carrier carrier_from_string(const std::string& s);

struct ClassPrototype {
  std::string name;
  Carrier carrier = Carrier::Tone;
  double freq_lo = 500.0;
  double freq_hi = 1000.0;
  double dur_min = 0.5;
  double dur_max = 1.5;
  /// Relative selection frequency.
  double weight = 1.0;
};

/// One acoustic domain: background, event inventory and placement statistics.
struct SynthConfig {
  std::string name = "domain";
  double clip_seconds = 10.0;
  int sample_rate = 16000;
  /// Background power spectrum ~ f^-color_exponent.
  double color_exponent = 0.0;
  double background_level_db = -30.0;
  double snr_min_db = 0.0;
  double snr_max_db = 12.0;
  /// Added to every event SNR.
  double snr_shift_db = 0.0;
  /// Probability that a new target event is allowed to overlap existing ones.
  double polyphony_rate = 0.3;
  int events_min = 2;
  int events_max = 6;
  int distractors_min = 1;
  int distractors_max = 3;
  std::vector<ClassPrototype> targets;
  std::vector<ClassPrototype> distractors;
  std::uint64_t seed = 1234;

  ClassMap class_map() const;
  void validate() const;
  /// True when background and SNR parameters coincide (no distribution gap).
  bool same_domain_parameters(const SynthConfig& other) const;
};

/// Nine target classes and four distractors.
std::vector<ClassPrototype> default_target_classes();
std::vector<ClassPrototype> default_distractor_classes();

/// Two source domains and one shifted target domain.
std::vector<SynthConfig> default_train_domains();
SynthConfig default_test_domain();

struct SynthScene {
  Waveform waveform;
  EventList events;
};

SynthScene synth_scene(const SynthConfig& cfg, int domain_id, std::mt19937_64& rng);

/// Independent stream for one clip.
std::mt19937_64 clip_rng(std::uint64_t seed, int domain_id, int clip_index);

struct Clip {
  std::string id;
  int domain_id = 0;
  Waveform waveform;
  EventList events;
};

struct DatasetSplit {
  std::vector<Clip> train;
  std::vector<Clip> validation;
  std::vector<Clip> test;
  ClassMap class_map;
};

struct SplitSizes {
  int clips_per_train_domain = 50;
  int test_clips = 10;
  double validation_fraction = 0.2;
};

DatasetSplit make_split(const std::vector<SynthConfig>& train_domains, const SynthConfig& test_domain,
                        const SplitSizes& sizes, std::uint64_t seed);

// ---------------------------------------------------------------------------
// On-disk dataset

struct ManifestEntry {
  std::string id;
  std::string partition;  // train | validation | test
  std::string wav;        // relative to the manifest directory
  std::string annotation;
  int domain_id = 0;
  double duration = 0.0;
};

struct Manifest {
  std::vector<std::string> classes;
  std::vector<ManifestEntry> clips;
};

/// Writes WAV + TSV per clip and manifest.json under out_dir; returns the manifest path.
std::string write_dataset(const DatasetSplit& split, const std::string& out_dir);
Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& m, const std::string& path);
/// Loads audio and annotations back into a split.
DatasetSplit load_dataset(const std::string& manifest_path);

}  // namespace eowsed

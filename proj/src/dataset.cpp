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

#include "eowsed/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

namespace eowsed {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// annotations.hpp

void sort_events(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.onset, a.offset, a.label) < std::tie(b.onset, b.offset, b.label);
  });
}

ClassMap::ClassMap(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen(names_.begin(), names_.end());
  require(seen.size() == names_.size(), "class map: duplicate label");
}

std::optional<int> ClassMap::index(const std::string& label) const {
  auto it = std::find(names_.begin(), names_.end(), label);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

bool SedTargets::is_binary() const {
  return (values.array() == 0.0 || values.array() == 1.0).all();
}

SodTargets SodTargets::from_labels(const IntVector& labels) {
  SodTargets s;
  s.values = Matrix::Zero(labels.size(), kSodKnown);
  for (Eigen::Index t = 0; t < labels.size(); ++t) {
    require(labels[t] >= 0 && labels[t] < kSodKnown, "SOD label outside {0,1,2}");
    s.values(t, labels[t]) = 1.0;
  }
  return s;
}

bool SodTargets::is_hard() const {
  for (Eigen::Index t = 0; t < values.rows(); ++t) {
    int ones = 0;
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      const double v = values(t, k);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

IntVector SodTargets::labels() const {
  require(is_hard(), "SOD targets are soft; hard labels unavailable");
  IntVector out(values.rows());
  for (Eigen::Index t = 0; t < values.rows(); ++t) values.row(t).maxCoeff(&out[t]);
  return out;
}

// ---------------------------------------------------------------------------
// Annotations and frame targets

namespace {

double parse_number(std::string_view field, int line_no) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    fail("annotation line " + std::to_string(line_no) + ": malformed number '" + std::string(field) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

EventList parse_annotations(const std::string& text, const std::string& clip_id, double duration) {
  EventList out;
  out.clip_id = clip_id;
  out.duration = duration;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      fail("annotation line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
           std::to_string(fields.size()));
    }
    Event ev;
    ev.onset = parse_number(trim(fields[0]), line_no);
    ev.offset = parse_number(trim(fields[1]), line_no);
    ev.label = std::string(trim(fields[2]));
    if (ev.onset < 0.0) fail("annotation line " + std::to_string(line_no) + ": negative onset");
    if (ev.offset <= ev.onset) fail("annotation line " + std::to_string(line_no) + ": offset <= onset");
    if (ev.label.empty()) fail("annotation line " + std::to_string(line_no) + ": empty label");
    out.events.push_back(std::move(ev));
  }
  return out;
}

std::string format_annotations(const EventList& events) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& e : events.events) out << e.onset << '\t' << e.offset << '\t' << e.label << '\n';
  return out.str();
}

SedTargets rasterize_labels(const EventList& events, int frames, double hop_seconds, const ClassMap& class_map) {
  require(frames >= 1, "rasterize_labels: need at least one frame");
  require(hop_seconds > 0.0, "rasterize_labels: hop must be positive");
  SedTargets out;
  out.class_map = class_map;
  out.values = Matrix::Zero(frames, class_map.size());
  for (const auto& e : events.events) {
    const auto c = class_map.index(e.label);
    if (!c) continue;
    // Active iff onset < (t+1)*hop and offset > t*hop, with edge tolerance.
    const auto first = static_cast<long>(std::floor((e.onset + kFrameEdgeTolerance) / hop_seconds));
    const auto last = static_cast<long>(std::ceil((e.offset - kFrameEdgeTolerance) / hop_seconds)) - 1;
    for (long t = std::max(0L, first); t <= std::min<long>(frames - 1, last); ++t) out.values(t, *c) = 1.0;
  }
  return out;
}

SodTargets derive_sod_targets(const SedTargets& sed) {
  require(sed.is_binary(), "derive_sod_targets: SED targets must be binary (derive SOD before mixup)");
  IntVector labels(sed.values.rows());
  for (Eigen::Index t = 0; t < sed.values.rows(); ++t) {
    const auto active = static_cast<int>(sed.values.row(t).sum());
    labels[t] = std::min(active, 2);
  }
  return SodTargets::from_labels(labels);
}

// ---------------------------------------------------------------------------
// Synthetic scenes

std::string to_string(Carrier c) {
  switch (c) {
    case Carrier::Tone: return "tone";
    case Carrier::Chirp: return "chirp";
    case Carrier::NoiseBurst: return "noise_burst";
    case Carrier::AmTone: return "am_tone";
  }
  return "tone";
}

Carrier carrier_from_string(const std::string& s) {
  if (s == "tone") return Carrier::Tone;
  if (s == "chirp") return Carrier::Chirp;
  if (s == "noise_burst") return Carrier::NoiseBurst;
  if (s == "am_tone") return Carrier::AmTone;
  fail("unknown carrier type '" + s + "'");
}

std::vector<ClassPrototype> default_target_classes() {
  return {
      {"bs", Carrier::Chirp, 2800.0, 4500.0, 0.3, 1.0, 1.0},       // bird singing
      {"ca", Carrier::NoiseBurst, 150.0, 500.0, 1.5, 4.0, 1.0},    // car
      {"ch", Carrier::AmTone, 700.0, 1100.0, 0.5, 2.0, 1.0},       // children
      {"im", Carrier::NoiseBurst, 800.0, 3500.0, 0.1, 0.3, 1.0},   // impact
      {"lv", Carrier::AmTone, 70.0, 140.0, 2.0, 5.0, 1.0},         // large vehicle
      {"pt", Carrier::AmTone, 220.0, 380.0, 1.0, 3.0, 1.0},        // people talking
      {"pw", Carrier::NoiseBurst, 1200.0, 2000.0, 1.0, 3.0, 1.0},  // people walking
      {"ru", Carrier::NoiseBurst, 4500.0, 7000.0, 0.3, 1.5, 1.0},  // rustling
      {"sq", Carrier::Tone, 1800.0, 2500.0, 0.2, 0.6, 1.0},        // squeaking
  };
}

std::vector<ClassPrototype> default_distractor_classes() {
  return {
      {"door", Carrier::NoiseBurst, 300.0, 1200.0, 0.2, 0.5, 1.0},
      {"dishes", Carrier::Tone, 3000.0, 3600.0, 0.1, 0.4, 1.0},
      {"wind", Carrier::NoiseBurst, 60.0, 250.0, 1.0, 3.0, 1.0},
      {"music", Carrier::Chirp, 450.0, 900.0, 1.0, 2.5, 1.0},
  };
}

std::vector<SynthConfig> default_train_domains() {
  SynthConfig home;
  home.name = "home";
  home.color_exponent = 0.0;
  home.background_level_db = -30.0;
  home.snr_min_db = 6.0;
  home.snr_max_db = 18.0;
  home.events_min = 4;
  home.events_max = 8;
  home.targets = default_target_classes();
  home.distractors = default_distractor_classes();

  SynthConfig residential = home;
  residential.name = "residential_area";
  residential.color_exponent = 0.3;
  residential.background_level_db = -28.0;
  return {home, residential};
}

SynthConfig default_test_domain() {
  SynthConfig city = default_train_domains().front();
  city.name = "city_center";
  city.color_exponent = 1.0;
  city.background_level_db = -24.0;
  city.snr_shift_db = -3.0;
  // Street sounds never heard in training: the open-set part of the shift.
  city.distractors = {
      {"siren", Carrier::AmTone, 600.0, 1500.0, 1.0, 3.0, 1.0},
      {"horn", Carrier::Tone, 350.0, 500.0, 0.3, 1.0, 1.0},
      {"brakes", Carrier::Chirp, 3500.0, 6000.0, 0.5, 1.5, 1.0},
      {"jackhammer", Carrier::NoiseBurst, 500.0, 2500.0, 1.0, 3.0, 1.0},
  };
  city.distractors_min = 2;
  city.distractors_max = 4;
  return city;
}

ClassMap SynthConfig::class_map() const {
  std::vector<std::string> names;
  for (const auto& p : targets) names.push_back(p.name);
  return ClassMap(names);
}

void SynthConfig::validate() const {
  require(clip_seconds > 0.0 && sample_rate > 0, "synth config: clip length and rate must be positive");
  require(polyphony_rate >= 0.0 && polyphony_rate <= 1.0, "synth config: polyphony_rate outside [0,1]");
  require(events_min >= 0 && events_max >= events_min, "synth config: bad events-per-clip range");
  require(distractors_min >= 0 && distractors_max >= distractors_min, "synth config: bad distractor range");
  require(snr_max_db >= snr_min_db, "synth config: bad SNR range");
  require(!targets.empty(), "synth config: no target classes");
  std::set<std::string> names;
  for (const auto* list : {&targets, &distractors}) {
    double total = 0.0;
    for (const auto& p : *list) {
      require(names.insert(p.name).second, "synth config: class '" + p.name + "' listed twice");
      require(p.freq_lo > 0.0 && p.freq_hi >= p.freq_lo && p.freq_hi < sample_rate / 2.0,
              "synth config: bad frequency range for '" + p.name + "'");
      require(p.dur_min > 0.0 && p.dur_max >= p.dur_min && p.dur_max <= clip_seconds,
              "synth config: bad duration range for '" + p.name + "'");
      require(p.weight >= 0.0, "synth config: negative class weight for '" + p.name + "'");
      total += p.weight;
    }
    require(list->empty() || total > 0.0, "synth config: class weights sum to zero");
  }
}

bool SynthConfig::same_domain_parameters(const SynthConfig& o) const {
  return color_exponent == o.color_exponent && background_level_db == o.background_level_db &&
         snr_shift_db == o.snr_shift_db && snr_min_db == o.snr_min_db && snr_max_db == o.snr_max_db;
}

std::mt19937_64 clip_rng(std::uint64_t seed, int domain_id, int clip_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(domain_id), static_cast<std::uint32_t>(clip_index), 0x5eedu};
  return std::mt19937_64(seq);
}

namespace {

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

void scale_to_rms(std::vector<double>& x, double target) {
  const double r = rms(x);
  if (r <= 0.0) return;
  for (double& v : x) v *= target / r;
}

/// White Gaussian noise shaped in the frequency domain by |H(f)|^2 = mask(f).
template <typename Mask>
std::vector<double> shaped_noise(std::size_t n, int sample_rate, std::mt19937_64& rng, Mask mask) {
  // Shaped at a power-of-two length and truncated: kissfft is quadratic in large prime factors.
  const std::size_t m = std::bit_ceil(std::max<std::size_t>(n, 2));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(m);
  for (double& v : x) v = gauss(rng);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t kk = k <= m / 2 ? k : m - k;
    const double f = static_cast<double>(kk) * sample_rate / static_cast<double>(m);
    spec[k] *= std::sqrt(mask(f));
  }
  fft.inv(x, spec);
  x.resize(n);
  return x;
}

std::vector<double> render_carrier(const ClassPrototype& p, std::size_t n, int sample_rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sr = sample_rate;
  std::vector<double> x(n, 0.0);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  switch (p.carrier) {
    case Carrier::Tone: {
      const double f = p.freq_lo + (p.freq_hi - p.freq_lo) * unit(rng);
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * i / sr + phase);
      break;
    }
    case Carrier::Chirp: {
      const bool up = unit(rng) < 0.5;
      const double f0 = up ? p.freq_lo : p.freq_hi;
      const double f1 = up ? p.freq_hi : p.freq_lo;
      const double dur = static_cast<double>(n) / sr;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / sr;
        x[i] = std::sin(2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / dur * t * t) + phase);
      }
      break;
    }
    case Carrier::NoiseBurst: {
      x = shaped_noise(n, sample_rate, rng, [&](double f) { return f >= p.freq_lo && f <= p.freq_hi ? 1.0 : 0.0; });
      break;
    }
    case Carrier::AmTone: {
      const double f = p.freq_lo + (p.freq_hi - p.freq_lo) * unit(rng);
      const double fm = 3.0 + 7.0 * unit(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / sr;
        const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * fm * t);
        x[i] = env * (std::sin(2.0 * std::numbers::pi * f * t + phase) +
                      0.5 * std::sin(2.0 * std::numbers::pi * 2.0 * f * t + phase));
      }
      break;
    }
  }
  // 10 ms raised-cosine ramps.
  const std::size_t ramp = std::min<std::size_t>(n / 2, static_cast<std::size_t>(0.01 * sr));
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
    x[i] *= g;
    x[n - 1 - i] *= g;
  }
  return x;
}

const ClassPrototype& pick_class(const std::vector<ClassPrototype>& list, std::mt19937_64& rng) {
  std::vector<double> w;
  for (const auto& p : list) w.push_back(p.weight);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return list[dist(rng)];
}

}  // namespace

SynthScene synth_scene(const SynthConfig& cfg, int domain_id, std::mt19937_64& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sr = cfg.sample_rate;
  const auto n = static_cast<std::size_t>(std::lround(cfg.clip_seconds * sr));
  const double bg_rms = std::pow(10.0, cfg.background_level_db / 20.0);

  const double beta = cfg.color_exponent;
  auto audio = shaped_noise(n, cfg.sample_rate, rng, [beta](double f) {
    return f <= 0.0 ? 0.0 : std::pow(std::max(f, 20.0) / 1000.0, -beta);
  });
  scale_to_rms(audio, bg_rms);

  SynthScene scene;
  scene.events.clip_id = "domain" + std::to_string(domain_id);
  scene.events.duration = cfg.clip_seconds;

  auto place = [&](const ClassPrototype& p, bool must_not_overlap, std::vector<Event>& taken) -> bool {
    constexpr int kAttempts = 50;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double dur = p.dur_min + (p.dur_max - p.dur_min) * unit(rng);
      const double onset = (cfg.clip_seconds - dur) * unit(rng);
      const double offset = onset + dur;
      if (must_not_overlap) {
        const bool clash = std::any_of(taken.begin(), taken.end(),
                                       [&](const Event& e) { return onset < e.offset && offset > e.onset; });
        if (clash) continue;
      }
      const double snr = cfg.snr_min_db + (cfg.snr_max_db - cfg.snr_min_db) * unit(rng) + cfg.snr_shift_db;
      const auto start = static_cast<std::size_t>(std::lround(onset * sr));
      const auto stop = std::min(n, static_cast<std::size_t>(std::lround(offset * sr)));
      auto sig = render_carrier(p, stop - start, cfg.sample_rate, rng);
      scale_to_rms(sig, bg_rms * std::pow(10.0, snr / 20.0));
      for (std::size_t i = 0; i < sig.size(); ++i) audio[start + i] += sig[i];
      Event ev{start / sr, stop / sr, p.name};
      taken.push_back(ev);
      scene.events.events.push_back(ev);
      return true;
    }
    return false;
  };

  std::uniform_int_distribution<int> n_events(cfg.events_min, cfg.events_max);
  std::vector<Event> targets_taken;
  const int k = n_events(rng);
  for (int i = 0; i < k; ++i) {
    const auto& p = pick_class(cfg.targets, rng);
    const bool allow_overlap = unit(rng) < cfg.polyphony_rate;
    place(p, !allow_overlap, targets_taken);
  }
  if (!cfg.distractors.empty()) {
    std::uniform_int_distribution<int> n_distractors(cfg.distractors_min, cfg.distractors_max);
    std::vector<Event> distractors_taken;
    const int kd = n_distractors(rng);
    for (int i = 0; i < kd; ++i) place(pick_class(cfg.distractors, rng), false, distractors_taken);
  }

  double peak = 0.0;
  for (double v : audio) peak = std::max(peak, std::abs(v));
  if (peak > 0.99) {
    for (double& v : audio) v *= 0.99 / peak;
  }
  sort_events(scene.events.events);
  scene.waveform.sample_rate = cfg.sample_rate;
  scene.waveform.samples = std::move(audio);
  return scene;
}

DatasetSplit make_split(const std::vector<SynthConfig>& train_domains, const SynthConfig& test_domain,
                        const SplitSizes& sizes, std::uint64_t seed) {
  require(!train_domains.empty(), "make_split: no training domains");
  require(sizes.clips_per_train_domain >= 1 && sizes.test_clips >= 1, "make_split: clip counts must be positive");
  require(sizes.validation_fraction > 0.0 && sizes.validation_fraction < 1.0,
          "make_split: validation_fraction must lie in (0,1)");
  const ClassMap classes = test_domain.class_map();
  for (const auto& d : train_domains) {
    d.validate();
    require(d.class_map() == classes, "make_split: domains disagree on the target class list");
    if (d.same_domain_parameters(test_domain)) {
      fail("make_split: test domain '" + test_domain.name + "' has the same background/SNR parameters as train domain '" +
           d.name + "' (no distribution gap)");
    }
  }
  test_domain.validate();

  auto make_clip = [&](const SynthConfig& cfg, int domain_id, int index) {
    auto rng = clip_rng(seed ^ cfg.seed, domain_id, index);
    auto scene = synth_scene(cfg, domain_id, rng);
    Clip c;
    char buf[64];
    std::snprintf(buf, sizeof buf, "d%d_c%04d", domain_id, index);
    c.id = buf;
    c.domain_id = domain_id;
    c.waveform = std::move(scene.waveform);
    c.events = std::move(scene.events);
    c.events.clip_id = c.id;
    return c;
  };

  DatasetSplit split;
  split.class_map = classes;
  std::vector<Clip> pool;
  for (std::size_t d = 0; d < train_domains.size(); ++d) {
    for (int i = 0; i < sizes.clips_per_train_domain; ++i) {
      pool.push_back(make_clip(train_domains[d], static_cast<int>(d), i));
    }
  }
  const auto n_val = static_cast<std::size_t>(std::lround(sizes.validation_fraction * static_cast<double>(pool.size())));
  require(n_val >= 1 && n_val < pool.size(), "make_split: validation/train partition would be empty");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_val(pool.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (is_val[i] ? split.validation : split.train).push_back(std::move(pool[i]));
  }
  const int test_id = static_cast<int>(train_domains.size());
  for (int i = 0; i < sizes.test_clips; ++i) split.test.push_back(make_clip(test_domain, test_id, i));
  return split;
}

// ---------------------------------------------------------------------------
// On-disk dataset

void write_manifest(const Manifest& m, const std::string& path) {
  json j;
  j["classes"] = m.classes;
  j["clips"] = json::array();
  for (const auto& e : m.clips) {
    j["clips"].push_back({{"id", e.id},
                          {"partition", e.partition},
                          {"wav", e.wav},
                          {"annotation", e.annotation},
                          {"domain_id", e.domain_id},
                          {"duration", e.duration}});
  }
  std::ofstream out(path);
  if (!out) throw RuntimeAbort("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeAbort("cannot read manifest: " + path);
  json j;
  try {
    in >> j;
    Manifest m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& c : j.at("clips")) {
      ManifestEntry e;
      e.id = c.at("id").get<std::string>();
      e.partition = c.at("partition").get<std::string>();
      e.wav = c.at("wav").get<std::string>();
      e.annotation = c.at("annotation").get<std::string>();
      e.domain_id = c.at("domain_id").get<int>();
      e.duration = c.at("duration").get<double>();
      require(e.partition == "train" || e.partition == "validation" || e.partition == "test",
              "manifest: unknown partition '" + e.partition + "' for clip " + e.id);
      m.clips.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& ex) {
    fail("malformed manifest " + path + ": " + ex.what());
  }
}

std::string write_dataset(const DatasetSplit& split, const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "audio");
  fs::create_directories(fs::path(out_dir) / "annotations");
  Manifest m;
  m.classes = split.class_map.names();
  auto emit = [&](const std::vector<Clip>& clips, const std::string& partition) {
    for (const auto& c : clips) {
      ManifestEntry e{c.id, partition, "audio/" + c.id + ".wav", "annotations/" + c.id + ".tsv", c.domain_id,
                      c.waveform.duration()};
      write_wav((fs::path(out_dir) / e.wav).string(), c.waveform);
      std::ofstream tsv(fs::path(out_dir) / e.annotation);
      if (!tsv) throw RuntimeAbort("cannot write " + (fs::path(out_dir) / e.annotation).string());
      tsv << format_annotations(c.events);
      m.clips.push_back(std::move(e));
    }
  };
  emit(split.train, "train");
  emit(split.validation, "validation");
  emit(split.test, "test");
  const auto path = (fs::path(out_dir) / "manifest.json").string();
  write_manifest(m, path);
  return path;
}

DatasetSplit load_dataset(const std::string& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  DatasetSplit split;
  split.class_map = ClassMap(m.classes);
  std::set<std::string> ids;
  for (const auto& e : m.clips) {
    require(ids.insert(e.id).second, "manifest: clip id '" + e.id + "' appears twice");
    Clip c;
    c.id = e.id;
    c.domain_id = e.domain_id;
    c.waveform = read_wav((root / e.wav).string());
    std::ifstream tsv(root / e.annotation);
    if (!tsv) throw RuntimeAbort("cannot read " + (root / e.annotation).string());
    std::stringstream buf;
    buf << tsv.rdbuf();
    c.events = parse_annotations(buf.str(), e.id, e.duration);
    auto& dst = e.partition == "train" ? split.train : e.partition == "validation" ? split.validation : split.test;
    dst.push_back(std::move(c));
  }
  return split;
}

}  // namespace eowsed

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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include <unsupported/Eigen/FFT>

#include "eowsed/dataset.hpp"
#include "eowsed/features.hpp"

using namespace eowsed;

namespace {

const ClassMap kClasses({"a", "b", "c"});

/// Per-frame, per-event overlap scan.
Matrix brute_force_raster(const EventList& ev, int T, double hop, const ClassMap& cm) {
  Matrix out = Matrix::Zero(T, cm.size());
  for (int t = 0; t < T; ++t) {
    const double lo = t * hop, hi = (t + 1) * hop;
    for (const auto& e : ev.events) {
      const auto c = cm.index(e.label);
      if (!c) continue;
      if (e.onset < hi - 1e-9 && e.offset > lo + 1e-9) out(t, *c) = 1.0;
    }
  }
  return out;
}

/// Log power vs log frequency slope between 100 Hz and 4 kHz. Per-bin median over
/// Hann frames (a median-Welch estimate) so sparse foreground events do not bias it.
double spectral_slope(const Waveform& w) {
  const int n = 1024;
  Eigen::FFT<double> fft;
  std::vector<std::vector<double>> power(n / 2 + 1);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spec;
  for (std::size_t start = 0; start + n <= w.samples.size(); start += n / 2) {
    for (int i = 0; i < n; ++i) frame[i] = w.samples[start + i] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
    fft.fwd(spec, frame);
    for (int k = 0; k <= n / 2; ++k) power[k].push_back(std::norm(spec[k]));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * w.sample_rate / n;
    if (f < 100.0 || f > 4000.0) continue;
    auto& p = power[k];
    std::nth_element(p.begin(), p.begin() + p.size() / 2, p.end());
    const double x = std::log(f), y = std::log(p[p.size() / 2]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

SynthConfig quiet_domain(double beta) {
  SynthConfig c = default_train_domains().front();
  c.color_exponent = beta;
  return c;
}

}  // namespace

TEST_CASE("parse annotations") {
  const auto one = parse_annotations("0.50\t1.20\tca\n");
  REQUIRE(one.events.size() == 1);
  CHECK(one.events[0] == Event{0.5, 1.2, "ca"});
  CHECK(parse_annotations("").events.empty());
  CHECK(parse_annotations("\n\n").events.empty());

  const auto unknown = parse_annotations("1\t2\tdoor\n");
  CHECK(unknown.events.at(0).label == "door");

  auto sorted = parse_annotations("0.1\t0.4\ta\n0.2\t0.9\tb\n1.5\t2.0\ta\n");
  auto shuffled = parse_annotations("1.5\t2.0\ta\n0.1\t0.4\ta\n0.2\t0.9\tb\n");
  sort_events(shuffled.events);
  CHECK(shuffled.events == sorted.events);
}

TEST_CASE("parse errors name the line") {
  auto message = [](const std::string& text) {
    try {
      parse_annotations(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("0.1\t0.2\ta\n0.x\t0.3\tb\n").find("line 2") != std::string::npos);
  CHECK(message("0.5\t0.5\ta\n").find("line 1") != std::string::npos);
  CHECK(message("0.1\t0.2\ta\n\n0.9\t0.3\tb\n").find("line 3") != std::string::npos);
  CHECK(message("0.1\t0.2\n").find("line 1") != std::string::npos);
}

TEST_CASE("annotation round trip is exact") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 9.0);
  EventList ev;
  for (int i = 0; i < 50; ++i) {
    const double on = u(rng);
    ev.events.push_back({on, on + 0.01 + u(rng) / 9.0, std::string(1, static_cast<char>('a' + i % 3))});
  }
  const auto back = parse_annotations(format_annotations(ev));
  CHECK(back.events == ev.events);
  CHECK(rasterize_labels(back, 600, 0.016, kClasses).values == rasterize_labels(ev, 600, 0.016, kClasses).values);
}

TEST_CASE("rasterize examples") {
  EventList ev;
  ev.events = {{0.0, 0.032, "a"}};
  const auto r = rasterize_labels(ev, 5, 0.016, kClasses);
  CHECK(r.values(0, 0) == 1.0);
  CHECK(r.values(1, 0) == 1.0);
  CHECK(r.values(2, 0) == 0.0);
  CHECK(r.values.col(1).sum() == 0.0);

  CHECK(rasterize_labels(EventList{}, 4, 0.016, kClasses).values.isZero());

  EventList outside;
  outside.events = {{0.05, 20.0, "b"}, {1.0, 2.0, "door"}};
  const auto clipped = rasterize_labels(outside, 10, 0.016, kClasses);
  CHECK(clipped.values.col(1).sum() == 7.0);  // frames 3..9
  CHECK(clipped.values.col(0).sum() == 0.0);
}

TEST_CASE("rasterize matches a brute-force overlap scan") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    EventList ev;
    const int n = trial % 7;
    for (int i = 0; i < n; ++i) {
      double on = u(rng) * 3.0, off = on + 0.005 + u(rng);
      if (trial % 3 == 0) {  // snap to the grid to probe the frame edges
        on = std::round(on / 0.016) * 0.016;
        off = std::max(on + 0.016, std::round(off / 0.016) * 0.016);
      }
      ev.events.push_back({on, off, std::string(1, static_cast<char>('a' + i % 4))});  // 'd' is out of vocabulary
    }
    const int T = 150;
    CHECK(rasterize_labels(ev, T, 0.016, kClasses).values == brute_force_raster(ev, T, 0.016, kClasses));
  }
}

TEST_CASE("derive sod targets") {
  SedTargets sed;
  sed.class_map = kClasses;
  sed.values = Matrix(4, 3);
  sed.values << 0, 0, 0,  //
      1, 0, 0,            //
      1, 1, 0,            //
      1, 1, 1;
  const auto sod = derive_sod_targets(sed);
  const IntVector labels = sod.labels();
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 1);
  CHECK(labels[2] == 2);
  CHECK(labels[3] == 2);
  CHECK(sod.values.rowwise().sum().isApproxToConstant(1.0));

  std::mt19937_64 rng(2);
  std::bernoulli_distribution on(0.3);
  SedTargets random;
  random.class_map = kClasses;
  random.values = Matrix(200, 3);
  for (Eigen::Index i = 0; i < random.values.size(); ++i) random.values.data()[i] = on(rng);
  const IntVector l = derive_sod_targets(random).labels();
  for (int t = 0; t < 200; ++t) CHECK((l[t] == 0) == random.values.row(t).isZero());

  sed.values(1, 1) = 0.5;
  CHECK_THROWS_AS(derive_sod_targets(sed), ValidationError);
}

TEST_CASE("synth scene is deterministic and consistent with its labels") {
  const SynthConfig cfg = default_train_domains().front();
  auto r1 = clip_rng(5, 0, 3), r2 = clip_rng(5, 0, 3);
  const auto a = synth_scene(cfg, 0, r1);
  const auto b = synth_scene(cfg, 0, r2);
  CHECK(a.waveform.samples == b.waveform.samples);
  CHECK(a.events.events == b.events.events);
  auto r3 = clip_rng(5, 0, 4);
  CHECK(synth_scene(cfg, 0, r3).waveform.samples != a.waveform.samples);

  CHECK(a.waveform.samples.size() == 160000);
  for (double s : a.waveform.samples) REQUIRE((std::isfinite(s) && std::abs(s) <= 1.0));

  const ClassMap classes = cfg.class_map();
  const auto sed = rasterize_labels(a.events, 625, 0.016, classes);
  for (const auto& e : a.events.events) {
    CHECK(e.onset >= 0.0);
    CHECK(e.offset <= 10.0);
    CHECK(e.offset > e.onset);
    const auto c = classes.index(e.label);
    if (!c) continue;  // distractor
    const int first = static_cast<int>(std::floor(e.onset / 0.016));
    const int last = static_cast<int>(std::ceil(e.offset / 0.016)) - 1;
    CHECK(sed.values.col(*c).segment(first, last - first + 1).minCoeff() == 1.0);
  }
}

TEST_CASE("zero polyphony never overlaps target events") {
  SynthConfig cfg = default_train_domains().front();
  cfg.polyphony_rate = 0.0;
  cfg.events_min = 6;
  cfg.events_max = 8;
  const ClassMap classes = cfg.class_map();
  for (int i = 0; i < 30; ++i) {
    auto rng = clip_rng(1, 0, i);
    const auto scene = synth_scene(cfg, 0, rng);
    std::vector<Event> targets;
    for (const auto& e : scene.events.events) {
      if (classes.index(e.label)) targets.push_back(e);
    }
    for (std::size_t x = 0; x < targets.size(); ++x) {
      for (std::size_t y = x + 1; y < targets.size(); ++y) {
        CHECK(!(targets[x].onset < targets[y].offset && targets[y].onset < targets[x].offset));
      }
    }
  }
}

TEST_CASE("default split sizes and disjointness") {
  SplitSizes sizes;
  const auto split = make_split(default_train_domains(), default_test_domain(), sizes, 2024);
  CHECK(split.train.size() == 80);
  CHECK(split.validation.size() == 20);
  CHECK(split.test.size() == 10);
  std::set<std::string> ids;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& c : *part) CHECK(ids.insert(c.id).second);
  }
  for (const auto& c : split.validation) CHECK(c.domain_id < 2);
  for (const auto& c : split.test) CHECK(c.domain_id == 2);
  CHECK(split.class_map.size() == 9);

  const auto again = make_split(default_train_domains(), default_test_domain(), sizes, 2024);
  CHECK(again.validation.front().id == split.validation.front().id);
  CHECK(again.test.back().waveform.samples == split.test.back().waveform.samples);
}

TEST_CASE("test domain distractors are unseen in training") {
  std::set<std::string> seen;
  for (const auto& d : default_train_domains()) {
    for (const auto& p : d.distractors) seen.insert(p.name);
  }
  const auto test = default_test_domain();
  CHECK(test.distractors.size() == 4);
  for (const auto& p : test.distractors) CHECK(seen.count(p.name) == 0);
  CHECK(test.class_map().names() == default_train_domains().front().class_map().names());
  CHECK_NOTHROW(test.validate());
}

TEST_CASE("identical train and test domains are rejected") {
  SplitSizes sizes;
  sizes.clips_per_train_domain = 2;
  sizes.test_clips = 1;
  SynthConfig same = default_train_domains().front();
  same.name = "copy";
  CHECK_THROWS_AS(make_split(default_train_domains(), same, sizes, 1), ValidationError);
}

TEST_CASE("background spectral slope separates the domains") {
  // Backgrounds alone first: the slope estimate should recover the colour exponent.
  for (double beta : {0.0, 1.0}) {
    SynthConfig c = quiet_domain(beta);
    c.events_min = c.events_max = 0;
    c.distractors_min = c.distractors_max = 0;
    auto rng = clip_rng(3, 0, 0);
    CHECK(spectral_slope(synth_scene(c, 0, rng).waveform) == doctest::Approx(-beta).epsilon(0.15).scale(1.0));
  }

  SplitSizes sizes;
  sizes.clips_per_train_domain = 5;
  sizes.test_clips = 5;
  const auto split = make_split(default_train_domains(), default_test_domain(), sizes, 77);
  double train = 0.0, test = 0.0;
  for (const auto& c : split.train) train += spectral_slope(c.waveform) / static_cast<double>(split.train.size());
  for (const auto& c : split.test) test += spectral_slope(c.waveform) / static_cast<double>(split.test.size());
  MESSAGE("mean slope train " << train << ", test " << test);
  CHECK(test < train - 0.5);
}

TEST_CASE("dataset on disk round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "eowsed_test_dataset";
  std::filesystem::remove_all(dir);
  SplitSizes sizes;
  sizes.clips_per_train_domain = 3;
  sizes.test_clips = 2;
  const auto split = make_split(default_train_domains(), default_test_domain(), sizes, 9);
  const auto manifest = write_dataset(split, dir.string());
  const auto m = read_manifest(manifest);
  CHECK(m.clips.size() == 8);
  CHECK(m.classes == split.class_map.names());
  const auto back = load_dataset(manifest);
  REQUIRE(back.test.size() == 2);
  CHECK(back.test[1].events.events == split.test[1].events.events);
  CHECK(back.train.size() == split.train.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < split.test[0].waveform.samples.size(); ++i) {
    worst = std::max(worst, std::abs(back.test[0].waveform.samples[i] - split.test[0].waveform.samples[i]));
  }
  CHECK(worst < 1e-7);
  std::filesystem::remove_all(dir);
}

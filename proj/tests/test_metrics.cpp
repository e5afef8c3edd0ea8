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
#include <random>

#include "eowsed/dataset.hpp"
#include "eowsed/metrics.hpp"
#include "oracles.hpp"

using namespace eowsed;

namespace {

const ClassMap kAB({"a", "b"});

Matrix random_mask(Eigen::Index T, Eigen::Index C, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution on(p);
  Matrix m(T, C);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = on(rng);
  return m;
}

FusedPrediction from_mask(const Matrix& mask, double hop) {
  return {(0.1 + 0.8 * mask.array()).matrix(), hop};
}

}  // namespace

TEST_CASE("f_score examples") {
  CHECK(f_score(5, 5, 5) == doctest::Approx(0.5));
  CHECK(f_score(0, 0, 0) == 0.0);
  CHECK(f_score(3, 1, 2) == doctest::Approx(6.0 / 9.0));
}

TEST_CASE("segment counts") {
  std::mt19937_64 rng(5);
  const Matrix ref = random_mask(40, 3, 0.3, rng);
  const auto same = segment_counts(ref, ref);
  for (int c = 0; c < 3; ++c) {
    CHECK(same.per_class[c].fp == 0);
    CHECK(same.per_class[c].fn == 0);
    CHECK(same.per_class[c].tp == static_cast<long>(ref.col(c).sum()));
  }
  const auto none = segment_counts(ref, Matrix::Zero(40, 3));
  for (int c = 0; c < 3; ++c) {
    CHECK(none.per_class[c].tp == 0);
    CHECK(none.per_class[c].fn == static_cast<long>(ref.col(c).sum()));
  }
  for (int k = 0; k < 300; ++k) {
    const Matrix r = random_mask(1 + k % 50, 1 + k % 4, 0.4, rng);
    const Matrix e = random_mask(r.rows(), r.cols(), 0.4, rng);
    const auto got = segment_counts(r, e);
    const auto want = oracle::cell_counts(r, e);
    for (std::size_t c = 0; c < want.size(); ++c) CHECK(got.per_class[c] == want[c]);
  }
  CHECK_THROWS_AS(segment_counts(ref, Matrix::Zero(39, 3)), ValidationError);
}

TEST_CASE("segment pooling over several frames") {
  Matrix r = Matrix::Zero(6, 1), e = Matrix::Zero(6, 1);
  r(0, 0) = 1;  // segment 0 = frames 0..2
  e(2, 0) = 1;
  e(4, 0) = 1;  // segment 1 = frames 3..5
  const auto c = segment_counts(r, e, 3);
  CHECK(c.per_class[0] == Counts{1, 1, 0});
}

TEST_CASE("event counts examples") {
  EventList ref;
  ref.events = {{0.5, 1.5, "a"}, {2.0, 3.0, "b"}, {4.0, 4.3, "a"}};
  const auto same = event_counts(ref, ref, kAB);
  CHECK(same.pooled() == Counts{3, 0, 0});

  EventList one_ref, shifted;
  one_ref.events = {{1.0, 2.0, "a"}};
  shifted.events = {{2.0, 3.0, "a"}};
  CHECK(event_counts(one_ref, shifted, kAB).per_class[0] == Counts{0, 1, 1});

  // Offset collar is 20% of a long reference: 5 s event tolerates a 1 s offset error.
  EventList long_ref, late_end;
  long_ref.events = {{0.0, 5.0, "b"}};
  late_end.events = {{0.1, 5.9, "b"}};
  CHECK(event_counts(long_ref, late_end, kAB).per_class[1] == Counts{1, 0, 0});
  late_end.events = {{0.1, 6.1, "b"}};
  CHECK(event_counts(long_ref, late_end, kAB).per_class[1] == Counts{0, 1, 1});

  // Labels must agree; out-of-vocabulary labels are ignored.
  EventList wrong;
  wrong.events = {{1.0, 2.0, "b"}, {1.0, 2.0, "door"}};
  CHECK(event_counts(one_ref, wrong, kAB).pooled() == Counts{0, 1, 1});
}

TEST_CASE("event matching is optimal on small random instances") {
  const ClassMap classes({"a", "b", "c"});
  std::mt19937_64 rng(1234);
  const EventCollars collars;
  int divergent = 0;
  for (int k = 0; k < 300; ++k) {
    const auto inst = oracle::random_event_instance(rng, classes, 6);
    const auto got = event_counts(inst.ref, inst.est, classes, collars);
    for (int c = 0; c < classes.size(); ++c) {
      std::vector<Event> r, e;
      for (const auto& x : inst.ref.events) if (x.label == classes.name(c)) r.push_back(x);
      for (const auto& x : inst.est.events) if (x.label == classes.name(c)) e.push_back(x);
      const long best = oracle::exhaustive_matches(r, e, collars.onset, collars.offset_min, collars.offset_fraction);
      const auto& k_c = got.per_class[static_cast<std::size_t>(c)];
      divergent += k_c.tp != best;
      CHECK(k_c.tp == best);
      CHECK(k_c.fp == static_cast<long>(e.size()) - k_c.tp);
      CHECK(k_c.fn == static_cast<long>(r.size()) - k_c.tp);
    }
  }
  CHECK(divergent == 0);
}

TEST_CASE("a plain first-fit greedy would lose a match here") {
  // The earlier estimate fits both references, the later one only the first.
  // First-fit gives the earlier estimate r0 and strands the later one; the
  // matcher has to re-route the first pair to r1.
  EventList ref, est;
  ref.events = {{1.0, 2.0, "a"}, {1.15, 2.35, "a"}};  // r1 offset collar 0.24
  est.events = {{1.05, 2.15, "a"}, {1.1, 1.9, "a"}};
  auto fits = [&](const Event& r, const Event& e) { return EventCollars{}.match(r, e); };
  REQUIRE(fits(ref.events[0], est.events[0]));
  REQUIRE(fits(ref.events[1], est.events[0]));
  REQUIRE(fits(ref.events[0], est.events[1]));
  REQUIRE(!fits(ref.events[1], est.events[1]));
  CHECK(event_counts(ref, est, kAB).per_class[0] == Counts{2, 0, 0});
}

TEST_CASE("aggregate") {
  ClassCounts one(1);
  one.per_class[0] = {3, 1, 2};
  CHECK(aggregate(one, Averaging::Macro) == aggregate(one, Averaging::Micro));

  ClassCounts two(2);
  two.per_class[0] = {1, 0, 0};
  two.per_class[1] = {0, 1, 1};
  CHECK(aggregate(two, Averaging::Macro) == doctest::Approx(0.5));
  CHECK(aggregate(two, Averaging::Micro) == doctest::Approx(0.5));

  ClassCounts absent(3);
  absent.per_class[0] = {2, 0, 0};  // classes 1 and 2 never appear: excluded from macro
  CHECK(aggregate(absent, Averaging::Macro) == 1.0);
  CHECK_THROWS_AS(aggregate(ClassCounts(3), Averaging::Macro), ValidationError);
  CHECK(aggregate(ClassCounts(3), Averaging::Micro) == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> u(0, 20);
  for (int k = 0; k < 200; ++k) {
    ClassCounts c(5);
    long tp = 0, fp = 0, fn = 0;
    for (auto& x : c.per_class) {
      x = {u(rng), u(rng), u(rng)};
      tp += x.tp, fp += x.fp, fn += x.fn;
    }
    CHECK(aggregate(c, Averaging::Micro) == f_score(tp, fp, fn));
  }
}

TEST_CASE("hand-counted two-clip worksheet") {
  // hop 0.1 s, 20 frames, median filter off.
  //
  // clip 1  ref: a [0.0, 1.0] (frames 0-9), b [1.0, 1.5] (frames 10-14)
  //         est: a frames 1-9  -> (0.1, 1.0): onset off by 0.1, match
  //              b frames 13-16 -> (1.3, 1.7): onset off by 0.3, no match
  // clip 2  ref: a [0.5, 0.8] (frames 5-7)
  //         est: a frames 5-7 (match), a frames 15-17 (spurious)
  //
  //            event tp fp fn    segment tp fp fn
  //   a              2  1  0             12  3  1
  //   b              0  1  1              2  2  3
  const double hop = 0.1;
  Matrix m1 = Matrix::Zero(20, 2), m2 = Matrix::Zero(20, 2);
  m1.block(1, 0, 9, 1).setOnes();
  m1.block(13, 1, 4, 1).setOnes();
  m2.block(5, 0, 3, 1).setOnes();
  m2.block(15, 0, 3, 1).setOnes();
  std::vector<ClipReference> refs(2);
  refs[0].id = "c1";
  refs[0].events.events = {{0.0, 1.0, "a"}, {1.0, 1.5, "b"}};
  refs[1].id = "c2";
  refs[1].events.events = {{0.5, 0.8, "a"}};
  const std::map<std::string, FusedPrediction> preds = {{"c1", from_mask(m1, hop)}, {"c2", from_mask(m2, hop)}};
  EvalConfig cfg;
  cfg.median_window = 1;
  const auto r = evaluate_clipset(refs, preds, kAB, cfg);
  CHECK(r.event.per_class[0] == Counts{2, 1, 0});
  CHECK(r.event.per_class[1] == Counts{0, 1, 1});
  CHECK(r.segment.per_class[0] == Counts{12, 3, 1});
  CHECK(r.segment.per_class[1] == Counts{2, 2, 3});
  CHECK(r.ema_f1 == doctest::Approx((0.8 + 0.0) / 2));
  CHECK(r.emi_f1 == doctest::Approx(4.0 / 7.0));
  CHECK(r.sma_f1 == doctest::Approx((24.0 / 28.0 + 4.0 / 9.0) / 2));
  CHECK(r.smi_f1 == doctest::Approx(28.0 / 37.0));

  // Clip order never matters.
  const std::vector<ClipReference> flipped = {refs[1], refs[0]};
  const auto r2 = evaluate_clipset(flipped, preds, kAB, cfg);
  CHECK(r2.ema_f1 == r.ema_f1);
  CHECK(r2.smi_f1 == r.smi_f1);

  std::vector<ClipReference> extra = refs;
  extra.push_back({"c3", {}});
  CHECK_THROWS_WITH_AS(evaluate_clipset(extra, preds, kAB, cfg), doctest::Contains("c3"), ValidationError);
}

TEST_CASE("perfect and empty predictions") {
  // Grid-aligned events at least four frames long survive the window-7 median.
  std::vector<ClipReference> refs(3);
  std::map<std::string, FusedPrediction> perfect, empty;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> start(0, 80), len(4, 15);
  for (int i = 0; i < 3; ++i) {
    refs[i].id = "clip" + std::to_string(i);
    for (const char* label : {"a", "b"}) {
      const int s = start(rng);
      refs[i].events.events.push_back({s * 0.016, (s + len(rng)) * 0.016, label});
    }
    const auto mask = rasterize_labels(refs[i].events, 100, 0.016, kAB).values;
    perfect[refs[i].id] = from_mask(mask, 0.016);
    empty[refs[i].id] = from_mask(Matrix::Zero(100, 2), 0.016);
  }
  const auto p = evaluate_clipset(refs, perfect, kAB);
  CHECK(p.ema_f1 == 1.0);
  CHECK(p.emi_f1 == 1.0);
  CHECK(p.sma_f1 == 1.0);
  CHECK(p.smi_f1 == 1.0);
  const auto e = evaluate_clipset(refs, empty, kAB);
  CHECK(e.ema_f1 == 0.0);
  CHECK(e.emi_f1 == 0.0);
  CHECK(e.sma_f1 == 0.0);
  CHECK(e.smi_f1 == 0.0);
}

TEST_CASE("turning a false positive into a true positive never lowers a score") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<long> u(0, 10);
  for (int k = 0; k < 300; ++k) {
    ClassCounts c(3);
    for (auto& x : c.per_class) x = {u(rng), 1 + u(rng), u(rng)};
    ClassCounts better = c;
    auto& x = better.per_class[static_cast<std::size_t>(k % 3)];
    --x.fp;
    ++x.tp;
    CHECK(aggregate(better, Averaging::Micro) >= aggregate(c, Averaging::Micro));
    CHECK(aggregate(better, Averaging::Macro) >= aggregate(c, Averaging::Macro));
  }
}

TEST_CASE("segment and event counts agree on isolated single-frame events with zero collars") {
  std::mt19937_64 rng(13);
  std::bernoulli_distribution on(0.3);
  const double hop = 0.016;
  EventCollars zero{0.0, 0.0, 0.0};
  for (int k = 0; k < 100; ++k) {
    EventList ref, est;
    Matrix rm = Matrix::Zero(60, 2), em = Matrix::Zero(60, 2);
    for (int c = 0; c < 2; ++c) {
      for (int t = 0; t < 60; t += 2) {  // every other frame, so runs never merge
        if (on(rng)) {
          ref.events.push_back({t * hop, (t + 1) * hop, kAB.name(c)});
          rm(t, c) = 1;
        }
        if (on(rng)) {
          est.events.push_back({t * hop, (t + 1) * hop, kAB.name(c)});
          em(t, c) = 1;
        }
      }
    }
    sort_events(est.events);
    const auto ev = event_counts(ref, est, kAB, zero);
    const auto seg = segment_counts(rm, em);
    for (int c = 0; c < 2; ++c) CHECK(ev.per_class[c] == seg.per_class[c]);
  }
}

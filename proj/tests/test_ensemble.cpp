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

#include <filesystem>
#include <random>

#include "eowsed/dataset.hpp"
#include "eowsed/ensemble.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eowsed;
using namespace eowsed::testing;

namespace {

Posteriorgram random_member(int T, int C, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Posteriorgram pg;
  pg.sed = Matrix(T, C);
  for (Eigen::Index i = 0; i < pg.sed.size(); ++i) pg.sed.data()[i] = u(rng);
  pg.sod = softmax_rows(gaussian(T, 4, rng, 2.0));
  return pg;
}

Posteriorgram constant_member(std::initializer_list<double> sed_row) {
  Posteriorgram pg;
  pg.sed = Matrix(1, static_cast<Eigen::Index>(sed_row.size()));
  Eigen::Index i = 0;
  for (double v : sed_row) pg.sed(0, i++) = v;
  pg.sod = Matrix::Constant(1, 4, 0.25);
  return pg;
}

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_CASE("frame confidence") {
  Matrix sod(3, 4);
  sod << 0.25, 0.25, 0.25, 0.25,  //
      0, 0, 0, 1,                 //
      0.5, 0.3, 0.2, 0.0;
  const Vector c = frame_confidence(sod);
  CHECK(c[0] == doctest::Approx(0.75));
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 1.0);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 500; ++k) {
    const Matrix a = softmax_rows(gaussian(1, 4, rng));
    Matrix b = a;
    b(0, 3) += 0.1;
    b /= b.sum();
    CHECK(frame_confidence(b)[0] < frame_confidence(a)[0]);
  }
}

TEST_CASE("calibrated fusion examples") {
  {
    const std::vector<Posteriorgram> m = {constant_member({1.0}), constant_member({0.0})};
    const auto f = fuse_calibrated(m, {scalar(0.8), scalar(0.2)});
    CHECK(f.sed(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  }
  {
    const std::vector<Posteriorgram> m = {constant_member({0.6}), constant_member({0.2}), constant_member({0.4})};
    const auto f = fuse_calibrated(m, {scalar(1), scalar(1), scalar(2)});
    CHECK(f.sed(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  }
  {
    // Zero total confidence: unweighted mean.
    const std::vector<Posteriorgram> m = {constant_member({0.9}), constant_member({0.1})};
    const auto f = fuse_calibrated(m, {scalar(0.0), scalar(0.0)});
    CHECK(f.sed(0, 0) == doctest::Approx(0.5));
  }
}

TEST_CASE("calibrated fusion properties") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const int M = 1 + k % 5, T = 6, C = 3;
    std::vector<Posteriorgram> m;
    std::vector<Vector> conf, scaled, equal;
    for (int i = 0; i < M; ++i) {
      m.push_back(random_member(T, C, rng));
      conf.push_back(frame_confidence(m.back().sod));
      scaled.push_back(3.7 * conf.back());
      equal.push_back(Vector::Constant(T, 0.42));
    }
    const auto f = fuse_calibrated(m, conf);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index c = 0; c < C; ++c) {
        double lo = 1.0, hi = 0.0, mean = 0.0;
        for (const auto& p : m) {
          lo = std::min(lo, p.sed(t, c));
          hi = std::max(hi, p.sed(t, c));
          mean += p.sed(t, c) / M;
        }
        CHECK(f.sed(t, c) >= lo);
        CHECK(f.sed(t, c) <= hi);
        CHECK(std::abs(fuse_calibrated(m, equal).sed(t, c) - mean) <= 1e-12);
      }
    }
    CHECK((fuse_calibrated(m, scaled).sed - f.sed).cwiseAbs().maxCoeff() <= 1e-12);
    if (M == 1) CHECK(f.sed == m[0].sed);
    CHECK((fuse_average(m).sed - fuse_calibrated(m, equal).sed).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("fusion input validation") {
  std::mt19937_64 rng(2);
  const std::vector<Posteriorgram> m = {random_member(5, 2, rng), random_member(4, 2, rng)};
  CHECK_THROWS_AS(fuse_calibrated(m, {Vector::Ones(5), Vector::Ones(4)}), ValidationError);
  CHECK_THROWS_AS(fuse_average(m), ValidationError);
  const std::vector<Posteriorgram> ok = {random_member(5, 2, rng), random_member(5, 2, rng)};
  CHECK_THROWS_AS(fuse_calibrated(ok, {Vector::Ones(5)}), ValidationError);
  CHECK_THROWS_AS(fuse_average(ok, {0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(fuse_average(ok, {-0.5, 1.0}), ValidationError);
  CHECK_THROWS_AS(fuse_calibrated({}, {}), ValidationError);
}

TEST_CASE("average fusion examples") {
  std::mt19937_64 rng(6);
  const auto one = random_member(8, 3, rng);
  const std::vector<Posteriorgram> five(5, one);
  const auto f = fuse_average(five, {0.2, 0.2, 0.2, 0.2, 0.2});
  CHECK((f.sed - one.sed).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(fuse_average({one}).sed == one.sed);

  const std::vector<Posteriorgram> two = {constant_member({1.0}), constant_member({0.0})};
  CHECK(fuse_average(two, {3.0, 1.0}).sed(0, 0) == doctest::Approx(0.75));
}

TEST_CASE("median filter examples and oracle") {
  Vector spike(5);
  spike << 0, 0, 1, 0, 0;
  CHECK(median_filter(spike, 3).isZero());
  CHECK(median_filter(Vector::Constant(9, 0.3), 7).isApproxToConstant(0.3));
  CHECK_THROWS_AS(median_filter(spike, 4), ValidationError);
  CHECK_THROWS_AS(median_filter(spike, 0), ValidationError);
  CHECK(median_filter(spike, 1) == spike);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const int T = 1 + k % 40, w = 1 + 2 * (k % 5);
    std::vector<double> x(static_cast<std::size_t>(T));
    for (auto& v : x) v = k % 4 == 0 ? std::round(u(rng)) : u(rng);  // ties included
    const Vector got = median_filter(Eigen::Map<const Vector>(x.data(), T), w);
    const auto want = oracle::sorted_median(x, w);
    for (int t = 0; t < T; ++t) CHECK(got[t] == want[static_cast<std::size_t>(t)]);
  }
}

TEST_CASE("median filter on binary tracks") {
  // Tracks made of runs of at least four frames are roots of the window-7 filter,
  // so filtering twice equals filtering once.
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> run(4, 12);
  for (int k = 0; k < 200; ++k) {
    Vector x(60);
    Eigen::Index t = 0;
    double v = k % 2;
    while (t < x.size()) {
      const Eigen::Index n = std::min<Eigen::Index>(run(rng), x.size() - t);
      x.segment(t, n).setConstant(v);
      t += n;
      v = 1.0 - v;
    }
    const Vector once = median_filter(x, 7);
    const Vector twice = median_filter(once, 7);
    CHECK(once.segment(3, 54) == twice.segment(3, 54));
  }
  // General binary tracks are not: an alternating pattern flips on every pass.
  Vector alt(20);
  for (Eigen::Index i = 0; i < alt.size(); ++i) alt[i] = static_cast<double>(i % 2);
  const Vector once = median_filter(alt, 7);
  CHECK(once.segment(3, 14) == (1.0 - alt.segment(3, 14).array()).matrix());
  CHECK(median_filter(once, 7).segment(3, 14) != once.segment(3, 14));
}

TEST_CASE("decode events") {
  FusedPrediction f;
  f.sed = Matrix(3, 1);
  f.sed << 0.9, 0.9, 0.1;
  const ClassMap one_class({"a"});
  const auto ev = decode_events(f, one_class);
  REQUIRE(ev.events.size() == 1);
  CHECK(ev.events[0].onset == 0.0);
  CHECK(ev.events[0].offset == doctest::Approx(0.032));
  CHECK(ev.events[0].label == "a");

  f.sed.setConstant(0.2);
  CHECK(decode_events(f, one_class).events.empty());
  f.sed.setConstant(0.5);  // strictly above threshold
  CHECK(decode_events(f, one_class).events.empty());
  CHECK_THROWS_AS(decode_events(f, one_class, 1.0), ValidationError);
}

TEST_CASE("decode then rasterize reproduces the binarized mask") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ClassMap classes({"a", "b", "c", "d"});
  for (int k = 0; k < 200; ++k) {
    FusedPrediction f;
    f.sed = Matrix(50, 4);
    const double density = u(rng);
    for (Eigen::Index i = 0; i < f.sed.size(); ++i) f.sed.data()[i] = u(rng) < density ? 0.5 + 0.5 * u(rng) : 0.5 * u(rng);
    const auto ev = decode_events(f, classes);
    CHECK(rasterize_labels(ev, 50, f.hop_seconds, classes).values == binarize(f.sed));
  }
}

TEST_CASE("posteriorgram file round trip") {
  std::mt19937_64 rng(4);
  const auto pg = random_member(11, 3, rng);
  const auto path = (std::filesystem::temp_directory_path() / "eowsed_test.pgm").string();
  write_posteriorgram(path, pg);
  const auto back = read_posteriorgram(path);
  CHECK(back.sed == pg.sed);
  CHECK(back.sod == pg.sod);
  CHECK(back.hop_seconds == pg.hop_seconds);
  std::filesystem::remove(path);

  Posteriorgram bad = pg;
  bad.sod(0, 0) += 0.1;
  CHECK_THROWS_AS(write_posteriorgram(path, bad), ValidationError);
}

TEST_CASE("predict emits valid posteriorgrams") {
  const ModelParams p = init_params(tiny_arch(), 3);
  std::mt19937_64 rng(8);
  const auto pg = predict(p, FeatureMatrix{gaussian(12, 8, rng), 0.016});
  CHECK_NOTHROW(pg.validate());
  CHECK(pg.frames() == 12);
  CHECK(pg.classes() == 2);
}

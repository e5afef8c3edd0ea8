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

#include <map>
#include <string>
#include <vector>

#include "eowsed/annotations.hpp"
#include "eowsed/common.hpp"
#include "eowsed/ensemble.hpp"

namespace eowsed {

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

/// Per-class tp/fp/fn, indexed like the class map.
struct ClassCounts {
  std::vector<Counts> per_class;

  explicit ClassCounts(int n_classes = 0) : per_class(static_cast<std::size_t>(n_classes)) {}
  ClassCounts& operator+=(const ClassCounts& o);
  Counts pooled() const;
};

/// 2tp / (2tp + fp + fn), 0 when the denominator is 0.
double f_score(long tp, long fp, long fn);
inline double f_score(const Counts& c) { return f_score(c.tp, c.fp, c.fn); }

/// Frame-grid counting. `segment_frames` > 1 OR-pools consecutive frames into longer segments.
ClassCounts segment_counts(const Eigen::Ref<const Matrix>& reference, const Eigen::Ref<const Matrix>& estimate,
                           int segment_frames = 1);

struct EventCollars {
  double onset = 0.2;
  double offset_min = 0.2;
  /// Offset collar is max(offset_min, offset_fraction * reference duration).
  double offset_fraction = 0.2;

  double offset_for(const Event& ref) const;
  bool match(const Event& ref, const Event& est) const;
};

/// One-to-one matching per class, visiting estimates in onset order. Each
/// estimate first tries the earliest admissible reference and re-routes earlier
/// assignments along augmenting paths when that is the only way to match it.
ClassCounts event_counts(const EventList& reference, const EventList& estimate, const ClassMap& classes,
                         const EventCollars& collars = {});

enum class Averaging { Macro, Micro };

/// Micro: F1 of pooled counts. Macro: mean F1 over classes with tp+fp+fn > 0;
/// throws ValidationError when no class qualifies.
double aggregate(const ClassCounts& counts, Averaging mode);

struct MetricsReport {
  double ema_f1 = 0.0;
  double emi_f1 = 0.0;
  double sma_f1 = 0.0;
  double smi_f1 = 0.0;
  ClassCounts event{0};
  ClassCounts segment{0};
  std::vector<std::string> classes;
};

struct EvalConfig {
  double threshold = 0.5;
  int median_window = 7;
  int segment_frames = 1;
  EventCollars collars;
};

struct ClipReference {
  std::string id;
  EventList events;
};

/// Median filter, threshold, decode and count every clip; counts are pooled
/// across clips before averaging. Undefined macro scores are reported as NaN.
MetricsReport evaluate_clipset(const std::vector<ClipReference>& references,
                               const std::map<std::string, FusedPrediction>& predictions, const ClassMap& classes,
                               const EvalConfig& cfg = {});

}  // namespace eowsed

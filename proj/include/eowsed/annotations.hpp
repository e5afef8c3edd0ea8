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

#include <optional>
#include <string>
#include <vector>

#include "eowsed/common.hpp"

namespace eowsed {

struct Event {
  double onset = 0.0;
  double offset = 0.0;
  std::string label;

  bool operator==(const Event&) const = default;
};

struct EventList {
  std::string clip_id;
  double duration = 0.0;
  std::vector<Event> events;
};

/// Sorts by (onset, offset, label).
void sort_events(std::vector<Event>& events);

/// Ordered label vocabulary; column c of a target matrix belongs to names[c].
class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::vector<std::string> names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int c) const { return names_.at(static_cast<std::size_t>(c)); }
  /// Column for a label, or nullopt for labels outside the vocabulary.
  std::optional<int> index(const std::string& label) const;

  bool operator==(const ClassMap&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Frame-level multi-hot event activity, T x C with entries in [0,1].
struct SedTargets {
  Matrix values;
  ClassMap class_map;

  bool is_binary() const;
};

/// Frame-level SOD class as a T x 3 distribution. Hard labels are one-hot rows.
struct SodTargets {
  Matrix values;

  static SodTargets from_labels(const IntVector& labels);
  bool is_hard() const;
  /// Argmax labels; throws when the targets are soft.
  IntVector labels() const;
};

}  // namespace eowsed

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

#include "eowsed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "eowsed/dataset.hpp"

namespace eowsed {

ClassCounts& ClassCounts::operator+=(const ClassCounts& o) {
  if (per_class.empty()) per_class.resize(o.per_class.size());
  require(per_class.size() == o.per_class.size(), "class counts: class count mismatch");
  for (std::size_t c = 0; c < per_class.size(); ++c) per_class[c] += o.per_class[c];
  return *this;
}

Counts ClassCounts::pooled() const {
  Counts sum;
  for (const auto& c : per_class) sum += c;
  return sum;
}

double f_score(long tp, long fp, long fn) {
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

namespace {

Matrix pool_segments(const Eigen::Ref<const Matrix>& m, int segment_frames) {
  if (segment_frames == 1) return m;
  const Eigen::Index n = (m.rows() + segment_frames - 1) / segment_frames;
  Matrix out = Matrix::Zero(n, m.cols());
  for (Eigen::Index t = 0; t < m.rows(); ++t) out.row(t / segment_frames) = out.row(t / segment_frames).cwiseMax(m.row(t));
  return out;
}

}  // namespace

ClassCounts segment_counts(const Eigen::Ref<const Matrix>& reference, const Eigen::Ref<const Matrix>& estimate,
                           int segment_frames) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols()) {
    fail("segment_counts: reference and estimate are on different frame grids");
  }
  require(segment_frames >= 1, "segment_counts: segment_frames must be positive");
  const Matrix ref = pool_segments(reference, segment_frames);
  const Matrix est = pool_segments(estimate, segment_frames);
  ClassCounts out(static_cast<int>(ref.cols()));
  for (Eigen::Index c = 0; c < ref.cols(); ++c) {
    auto& k = out.per_class[static_cast<std::size_t>(c)];
    const auto r = ref.col(c).array() > 0.5;
    const auto e = est.col(c).array() > 0.5;
    k.tp = (r && e).count();
    k.fp = (!r && e).count();
    k.fn = (r && !e).count();
  }
  return out;
}

double EventCollars::offset_for(const Event& ref) const {
  return std::max(offset_min, offset_fraction * (ref.offset - ref.onset));
}

bool EventCollars::match(const Event& ref, const Event& est) const {
  return std::abs(ref.onset - est.onset) <= onset && std::abs(ref.offset - est.offset) <= offset_for(ref);
}

ClassCounts event_counts(const EventList& reference, const EventList& estimate, const ClassMap& classes,
                         const EventCollars& collars) {
  ClassCounts out(classes.size());
  for (int c = 0; c < classes.size(); ++c) {
    std::vector<Event> refs, ests;
    for (const auto& e : reference.events) {
      if (e.label == classes.name(c)) refs.push_back(e);
    }
    for (const auto& e : estimate.events) {
      if (e.label == classes.name(c)) ests.push_back(e);
    }
    sort_events(refs);
    sort_events(ests);

    std::vector<std::vector<int>> adj(ests.size());
    for (std::size_t i = 0; i < ests.size(); ++i) {
      for (std::size_t j = 0; j < refs.size(); ++j) {
        if (collars.match(refs[j], ests[i])) adj[i].push_back(static_cast<int>(j));
      }
    }
    std::vector<int> owner(refs.size(), -1);
    std::vector<char> seen;
    std::function<bool(int)> augment = [&](int i) {
      for (int j : adj[static_cast<std::size_t>(i)]) {
        if (seen[static_cast<std::size_t>(j)]) continue;
        seen[static_cast<std::size_t>(j)] = 1;
        if (owner[static_cast<std::size_t>(j)] < 0 || augment(owner[static_cast<std::size_t>(j)])) {
          owner[static_cast<std::size_t>(j)] = i;
          return true;
        }
      }
      return false;
    };
    long matched = 0;
    for (std::size_t i = 0; i < ests.size(); ++i) {
      seen.assign(refs.size(), 0);
      if (augment(static_cast<int>(i))) ++matched;
    }
    auto& k = out.per_class[static_cast<std::size_t>(c)];
    k.tp = matched;
    k.fp = static_cast<long>(ests.size()) - matched;
    k.fn = static_cast<long>(refs.size()) - matched;
  }
  return out;
}

double aggregate(const ClassCounts& counts, Averaging mode) {
  if (mode == Averaging::Micro) return f_score(counts.pooled());
  double sum = 0.0;
  int included = 0;
  for (const auto& c : counts.per_class) {
    if (c.tp + c.fp + c.fn == 0) continue;
    sum += f_score(c);
    ++included;
  }
  if (included == 0) fail("aggregate: macro average undefined (no class present in reference or estimate)");
  return sum / included;
}

MetricsReport evaluate_clipset(const std::vector<ClipReference>& references,
                               const std::map<std::string, FusedPrediction>& predictions, const ClassMap& classes,
                               const EvalConfig& cfg) {
  MetricsReport rep;
  rep.classes = classes.names();
  rep.event = ClassCounts(classes.size());
  rep.segment = ClassCounts(classes.size());
  for (const auto& ref : references) {
    const auto it = predictions.find(ref.id);
    if (it == predictions.end()) fail("evaluate_clipset: no prediction for clip '" + ref.id + "'");
    const FusedPrediction& pred = it->second;
    require(pred.sed.cols() == classes.size(), "evaluate_clipset: prediction width differs from class map for clip " + ref.id);
    FusedPrediction smoothed{median_filter_columns(pred.sed, cfg.median_window), pred.hop_seconds};
    const Matrix est_mask = binarize(smoothed.sed, cfg.threshold);
    const auto ref_mask = rasterize_labels(ref.events, static_cast<int>(pred.sed.rows()), pred.hop_seconds, classes);
    rep.segment += segment_counts(ref_mask.values, est_mask, cfg.segment_frames);

    // Reference events are clipped to the predicted span.
    EventList ref_events = ref.events;
    const double span = static_cast<double>(pred.sed.rows()) * pred.hop_seconds;
    std::vector<Event> kept;
    for (auto e : ref_events.events) {
      if (!classes.index(e.label) || e.onset >= span) continue;
      e.offset = std::min(e.offset, span);
      kept.push_back(e);
    }
    ref_events.events = std::move(kept);
    rep.event += event_counts(ref_events, decode_events(smoothed, classes, cfg.threshold), classes, cfg.collars);
  }
  auto safe = [](const ClassCounts& c, Averaging m) {
    try {
      return aggregate(c, m);
    } catch (const ValidationError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  rep.ema_f1 = safe(rep.event, Averaging::Macro);
  rep.emi_f1 = safe(rep.event, Averaging::Micro);
  rep.sma_f1 = safe(rep.segment, Averaging::Macro);
  rep.smi_f1 = safe(rep.segment, Averaging::Micro);
  return rep;
}

}  // namespace eowsed

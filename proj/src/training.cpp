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

#include "eowsed/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <atomic>
#include <mutex>
#include <numeric>
#include <thread>

namespace eowsed {

void TrainConfig::validate() const {
  require(tau >= 0.0, "train: tau must be nonnegative");
  require(lr > 0.0, "train: lr must be positive");
  require(batch_size >= 1, "train: batch_size must be positive");
  require(max_epochs >= 1, "train: max_epochs must be positive");
  require(warmup_epochs >= 0, "train: warmup_epochs must be nonnegative");
  require(patience >= 1, "train: patience must be at least 1");
  require(!seeds.empty(), "train: need at least one seed");
  require(mixup_alpha > 0.0 && mixup_beta > 0.0, "train: mixup Beta parameters must be positive");
  require(lambda >= 0.0, "train: lambda must be nonnegative");
  require(negatives_per_batch >= 0, "train: negatives_per_batch must be nonnegative");
  sgld.validate();
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.batch_size = 48;
  c.max_epochs = 200;
  c.warmup_epochs = 50;
  return c;
}

Example make_example(const Clip& clip, const FeatureConfig& features, const ClassMap& classes) {
  Example ex;
  ex.id = clip.id;
  ex.domain_id = clip.domain_id;
  ex.events = clip.events;
  ex.data.features = log_mel_spectrogram(clip.waveform, features);
  ex.data.sed = rasterize_labels(clip.events, ex.data.features.frames(), ex.data.features.hop_seconds, classes);
  ex.data.sod = derive_sod_targets(ex.data.sed);
  return ex;
}

std::vector<Example> make_examples(const std::vector<Clip>& clips, const FeatureConfig& features,
                                   const ClassMap& classes) {
  std::vector<Example> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(make_example(c, features, classes));
  return out;
}

namespace {

void check_bce_args(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& targets) {
  require(logits.rows() == targets.rows() && logits.cols() == targets.cols() && logits.size() > 0,
          "bce_loss: logits and targets must have the same non-empty shape");
  require((targets.array() >= 0.0).all() && (targets.array() <= 1.0).all(), "bce_loss: targets outside [0,1]");
}

}  // namespace

double bce_loss(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& targets) {
  check_bce_args(logits, targets);
  const auto l = logits.array();
  const auto cell = l.max(0.0) - l * targets.array() + (-l.abs()).exp().log1p();
  return cell.sum() / static_cast<double>(logits.size());
}

Matrix bce_grad(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& targets) {
  check_bce_args(logits, targets);
  return (sigmoid(logits) - targets) / static_cast<double>(logits.size());
}

BatchLoss total_loss(const ModelParams& p, const std::vector<const LabeledFeatures*>& batch,
                     const Eigen::Ref<const Matrix>& negatives, double tau, double lambda, bool with_grad) {
  require(!batch.empty(), "total_loss: empty batch");
  require(tau >= 0.0 && lambda >= 0.0, "total_loss: tau and lambda must be nonnegative");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  BatchLoss out;
  if (with_grad) out.grad = Gradients::Zero(p.values.size());
  ForwardCache cache;
  for (const auto* ex : batch) {
    const auto fo = forward(p, ex->features, with_grad ? &cache : nullptr);
    // Diverged weights: report NaN terms and let the caller decide; no gradient is meaningful.
    if (!fo.sed_logits.allFinite() || !fo.sod_logits.allFinite()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.loss.bce = fo.sed_logits.allFinite() ? out.loss.bce : nan;
      out.loss.mll = fo.sod_logits.allFinite() ? out.loss.mll : nan;
      out.loss.total = nan;
      return out;
    }
    out.loss.bce += inv_b * bce_loss(fo.sed_logits, ex->sed.values);
    OutputGrads up;
    if (tau > 0.0) {
      const auto eg = eow_loss_with_grad(fo.sod_logits, ex->sod, Matrix(0, kSodOutputs), 0.0);
      out.loss.mll += inv_b * eg.terms.mll_term;
      if (with_grad) up.sod_logits = (tau * inv_b) * eg.d_sod_logits;
    }
    if (with_grad) {
      up.sed_logits = inv_b * bce_grad(fo.sed_logits, ex->sed.values);
      out.grad += backward(p, cache, up);
    }
  }
  if (tau > 0.0 && lambda > 0.0) {
    if (negatives.rows() == 0) fail("total_loss: lambda > 0 requires negative samples");
    Matrix d_neg;
    const Matrix neg_logits = sod_head(p, negatives);
    if (!neg_logits.allFinite()) {
      out.loss.open = out.loss.total = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    out.loss.open = open_world_term(neg_logits, with_grad ? &d_neg : nullptr);
    if (with_grad) accumulate_sod_head_grad(p, negatives, (tau * lambda) * d_neg, out.grad);
  }
  out.loss.total = out.loss.bce + tau * (out.loss.mll + lambda * out.loss.open);
  return out;
}

std::vector<std::vector<int>> epoch_batches(int n, int batch_size, std::mt19937_64& rng) {
  require(n >= 0 && batch_size >= 1, "epoch_batches: bad sizes");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + start, order.begin() + std::min(n, start + batch_size));
  }
  return batches;
}

bool EarlyStopper::update(int epoch, double value) {
  if (value < best_) {
    best_ = value;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  return std::mt19937_64(seq);
}

void check_finite(const LossBreakdown& l, int epoch, int batch) {
  const std::pair<const char*, double> terms[] = {{"bce", l.bce}, {"mll", l.mll}, {"open", l.open}, {"total", l.total}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw RuntimeAbort("non-finite loss: epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                         ", term " + name);
    }
  }
}

}  // namespace

TrainedModel train_model(const std::vector<Example>& train, const std::vector<Example>& validation,
                         const ArchConfig& arch, const TrainConfig& cfg, std::uint64_t seed,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  require(!train.empty() && !validation.empty(), "train_model: train and validation partitions must be non-empty");

  TrainedModel result;
  result.seed = seed;
  ModelParams params = init_params(arch, seed);
  AdamState adam = AdamState::zeros(params.values.size());
  auto order_rng = stream(seed, 1);
  auto sgld_rng = stream(seed, 2);
  SgldBuffer buffer;

  const bool open = cfg.uses_open_loss() && cfg.lambda > 0.0;
  const int D = arch.embedding_dim();

  // Fixed negatives for validation in Gaussian mode; the SGLD buffer otherwise.
  Matrix val_gaussian;
  if (open && cfg.sgld.source == NegativeSource::Gaussian) {
    auto r = stream(seed, 3);
    val_gaussian = SgldBuffer::standard_normal(cfg.sgld.buffer_size, D, r).samples;
  }

  std::vector<const LabeledFeatures*> val_batch;
  for (const auto& e : validation) val_batch.push_back(&e.data);

  EarlyStopper stopper(cfg.patience);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = warmup_lr(epoch, cfg.lr, cfg.warmup_epochs);

    const auto batches = epoch_batches(static_cast<int>(train.size()), cfg.batch_size, order_rng);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      std::vector<LabeledFeatures> mixed;
      std::vector<const LabeledFeatures*> batch;
      if (cfg.mixup) {
        // Random within-batch partner for every clip.
        std::vector<int> partner(idx.begin(), idx.end());
        std::shuffle(partner.begin(), partner.end(), order_rng);
        mixed.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          const auto draw = sample_mixup(order_rng, cfg.mixup_alpha, cfg.mixup_beta);
          mixed.push_back(mixup(train[idx[i]].data, train[partner[i]].data, draw));
        }
        for (const auto& m : mixed) batch.push_back(&m);
      } else {
        for (int i : idx) batch.push_back(&train[i].data);
      }

      Matrix negatives(0, D);
      if (open) {
        const FrozenParams frozen{params};
        auto draw = sgld_sample(frozen, buffer, cfg.sgld, sgld_rng, cfg.negatives());
        rec.nonfinite_resets += draw.nonfinite_resets;
        negatives = std::move(draw.samples);
      }

      auto bl = total_loss(params, batch, negatives, cfg.tau, cfg.lambda, true);
      check_finite(bl.loss, epoch, static_cast<int>(bi));
      const double w = static_cast<double>(idx.size()) / static_cast<double>(train.size());
      rec.train.total += w * bl.loss.total;
      rec.train.bce += w * bl.loss.bce;
      rec.train.mll += w * bl.loss.mll;
      rec.train.open += w * bl.loss.open;
      adam_step(params, bl.grad, adam, rec.lr);
    }

    Matrix val_neg(0, D);
    if (open) val_neg = cfg.sgld.source == NegativeSource::Gaussian ? val_gaussian : buffer.samples;
    rec.validation = total_loss(params, val_batch, val_neg, cfg.tau, cfg.lambda, false).loss;
    check_finite(rec.validation, epoch, -1);

    result.history.push_back(rec);
    if (stopper.update(epoch, rec.validation.total)) {
      result.params = params;
      result.best_epoch = epoch;
      result.best_validation_loss = rec.validation.total;
    }
    if (on_epoch) on_epoch(seed, rec);
    if (stopper.should_stop()) break;
  }
  result.buffer = std::move(buffer);
  return result;
}

EnsembleBundle train_ensemble(const std::vector<Example>& train, const std::vector<Example>& validation,
                              const ArchConfig& arch, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  EnsembleBundle bundle;
  bundle.members.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex callback_mutex;
  EpochCallback guarded;
  if (on_epoch) {
    guarded = [&](std::uint64_t s, const EpochRecord& r) {
      std::lock_guard lock(callback_mutex);
      on_epoch(s, r);
    };
  }
  auto run = [&](std::size_t i) {
    try {
      bundle.members[i] = train_model(train, validation, arch, cfg, cfg.seeds[i], guarded);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(n, cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return bundle;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw RuntimeAbort("cannot write " + path);
  out.precision(10);
  out << "epoch,lr,train_total,train_bce,train_mll,train_open,val_total,val_bce,val_mll,val_open,sgld_resets\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train.total << ',' << r.train.bce << ',' << r.train.mll << ','
        << r.train.open << ',' << r.validation.total << ',' << r.validation.bce << ',' << r.validation.mll << ','
        << r.validation.open << ',' << r.nonfinite_resets << '\n';
  }
}

}  // namespace eowsed

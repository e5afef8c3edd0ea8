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
#include <string>
#include <vector>

#include "eowsed/common.hpp"
#include "eowsed/features.hpp"
#include "eowsed/layers.hpp"

namespace eowsed {

struct ConvBlockSpec {
  int out_channels = 16;
  int freq_pool = 4;

  bool operator==(const ConvBlockSpec&) const = default;
};

/// Dual-head CRNN shape. The default is the desk-scale network; see full_scale().
struct ArchConfig {
  int n_mels = 64;
  std::vector<ConvBlockSpec> conv_blocks = {{16, 4}, {32, 4}, {64, 4}};
  int gru_layers = 1;
  int gru_hidden = 32;
  int n_classes = 9;
  int sod_classes = kSodOutputs;

  int embedding_dim() const { return 2 * gru_hidden; }
  /// Mel bins left after all pooling stages.
  int pooled_freq() const;
  /// Per-frame width of the flattened conv output fed to the first GRU layer.
  int conv_output_dim() const;
  void validate() const;

  /// Seven conv blocks and two Bi-GRU layers on 128 mel bins.
  static ArchConfig full_scale(int n_classes = 9);

  bool operator==(const ArchConfig&) const = default;
};

/// Location of one named tensor inside the flat parameter vector.
struct ParamSlice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;

  Eigen::Index size() const { return rows * cols; }
};

/// Declaration-order layout of every trainable tensor.
class ParamLayout {
 public:
  explicit ParamLayout(const ArchConfig& arch);

  Eigen::Index total() const { return total_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }
  const ParamSlice& slice(const std::string& name) const;

  static std::string conv_weight(int b) { return "conv" + std::to_string(b) + ".weight"; }
  static std::string norm_scale(int b) { return "conv" + std::to_string(b) + ".scale"; }
  static std::string norm_shift(int b) { return "conv" + std::to_string(b) + ".shift"; }
  static std::string gru(int layer, int dir, const char* what) {
    return "gru" + std::to_string(layer) + (dir == 0 ? ".fwd." : ".bwd.") + what;
  }

 private:
  void add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::vector<ParamSlice> slices_;
  Eigen::Index total_ = 0;
};

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

inline MatrixMap view(Vector& flat, const ParamSlice& s) { return {flat.data() + s.offset, s.rows, s.cols}; }
inline ConstMatrixMap view(const Vector& flat, const ParamSlice& s) { return {flat.data() + s.offset, s.rows, s.cols}; }
inline VectorMap vec_view(Vector& flat, const ParamSlice& s) { return {flat.data() + s.offset, s.size()}; }
inline ConstVectorMap vec_view(const Vector& flat, const ParamSlice& s) { return {flat.data() + s.offset, s.size()}; }

/// All trainable weights, stored flat in layout order.
struct ModelParams {
  ArchConfig arch;
  Vector values;

  ParamLayout layout() const { return ParamLayout(arch); }
};

/// Detached copy used by the negative sampler; never touched by the optimizer.
struct FrozenParams {
  ModelParams params;
};

/// Gradient vector laid out like ModelParams::values.
using Gradients = Vector;

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed);

struct ForwardOutput {
  Matrix sed_logits;  // T x C
  Matrix sod_logits;  // T x 4
  Matrix embeddings;  // T x D
};

/// Activations retained for the reverse pass.
struct ForwardCache {
  struct ConvBlock {
    int frames = 0;
    int freq_in = 0;
    Matrix col;       // im2col of the block input
    Matrix conv_out;  // pre-normalization
    Matrix relu_out;
    layers::PoolResult pool;
  };
  struct GruLayer {
    Matrix input;
    layers::GruCache fwd;
    layers::GruCache bwd;
  };
  std::vector<ConvBlock> conv;
  std::vector<GruLayer> gru;
  Matrix embeddings;
};

ForwardOutput forward(const ModelParams& p, const FeatureMatrix& x, ForwardCache* cache = nullptr);

/// Upstream gradients on the three outputs; empty matrices count as zero.
struct OutputGrads {
  Matrix sed_logits;
  Matrix sod_logits;
  Matrix embeddings;
};

Gradients backward(const ModelParams& p, const ForwardCache& cache, const OutputGrads& upstream);

/// Applies the SOD head to arbitrary embeddings (rows in R^D).
Matrix sod_head(const ModelParams& p, const Eigen::Ref<const Matrix>& embeddings);
/// Adds the SOD-head parameter gradient for logits = embeddings * W + b to `grads`.
void accumulate_sod_head_grad(const ModelParams& p, const Eigen::Ref<const Matrix>& embeddings,
                              const Eigen::Ref<const Matrix>& d_logits, Gradients& grads);

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n);
};

/// One bias-corrected Adam update. Throws RuntimeAbort on a non-finite gradient.
void adam_step(ModelParams& p, const Gradients& g, AdamState& s, double lr);

/// base_lr * exp(-5 (1 - epoch/warmup)^2) during warmup, base_lr afterwards.
double warmup_lr(int epoch, double base_lr = 0.001, int warmup_epochs = 50);

/// Versioned container: magic, u32 version, u64 JSON length, ArchConfig JSON,
/// u64 parameter count, parameters as f64 in layout order.
void save_checkpoint(const std::string& path, const ModelParams& p);
ModelParams load_checkpoint(const std::string& path);

}  // namespace eowsed

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

#include "eowsed/model.hpp"

#include <cmath>
#include <random>

namespace eowsed {

using layers::GruWeights;

int ArchConfig::pooled_freq() const {
  int f = n_mels;
  for (const auto& b : conv_blocks) f = b.freq_pool > 0 ? f / b.freq_pool : 0;
  return f;
}

int ArchConfig::conv_output_dim() const {
  return conv_blocks.empty() ? 0 : pooled_freq() * conv_blocks.back().out_channels;
}

void ArchConfig::validate() const {
  require(n_mels >= 1, "arch: n_mels must be positive");
  require(!conv_blocks.empty(), "arch: need at least one conv block");
  int f = n_mels;
  for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
    const auto& b = conv_blocks[i];
    require(b.out_channels >= 1, "arch: conv block " + std::to_string(i) + " has no output channels");
    require(b.freq_pool >= 1 && f / b.freq_pool >= 1,
            "arch: conv block " + std::to_string(i) + " pools the mel axis below one bin");
    f /= b.freq_pool;
  }
  require(gru_layers >= 1, "arch: need at least one GRU layer");
  require(gru_hidden >= 1, "arch: gru_hidden must be positive");
  require(n_classes >= 1, "arch: n_classes must be positive");
  require(sod_classes == kSodOutputs, "arch: SOD head must have 4 outputs (3 activity classes + uncertainty)");
}

ArchConfig ArchConfig::full_scale(int n_classes) {
  ArchConfig a;
  a.n_mels = 128;
  a.conv_blocks = {{16, 2}, {32, 2}, {64, 2}, {128, 2}, {128, 2}, {128, 2}, {128, 2}};
  a.gru_layers = 2;
  a.gru_hidden = 128;
  a.n_classes = n_classes;
  return a;
}

ParamLayout::ParamLayout(const ArchConfig& arch) {
  arch.validate();
  int c_in = 1;
  for (std::size_t b = 0; b < arch.conv_blocks.size(); ++b) {
    const int c_out = arch.conv_blocks[b].out_channels;
    add(conv_weight(static_cast<int>(b)), 9 * c_in, c_out);
    add(norm_scale(static_cast<int>(b)), c_out, 1);
    add(norm_shift(static_cast<int>(b)), c_out, 1);
    c_in = c_out;
  }
  const int H = arch.gru_hidden;
  int in = arch.conv_output_dim();
  for (int l = 0; l < arch.gru_layers; ++l) {
    for (int d = 0; d < 2; ++d) {
      add(gru(l, d, "w_input"), in, 3 * H);
      add(gru(l, d, "w_hidden"), H, 3 * H);
      add(gru(l, d, "b_input"), 3 * H, 1);
      add(gru(l, d, "b_hidden"), 3 * H, 1);
    }
    in = 2 * H;
  }
  add("sed.weight", arch.embedding_dim(), arch.n_classes);
  add("sed.bias", arch.n_classes, 1);
  add("sod.weight", arch.embedding_dim(), arch.sod_classes);
  add("sod.bias", arch.sod_classes, 1);
}

void ParamLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  slices_.push_back({std::move(name), total_, rows, cols});
  total_ += rows * cols;
}

const ParamSlice& ParamLayout::slice(const std::string& name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return s;
  }
  fail("unknown parameter '" + name + "'");
}

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed) {
  const ParamLayout layout(arch);
  ModelParams p;
  p.arch = arch;
  p.values = Vector::Zero(layout.total());
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](const ParamSlice& s, double fan_in) {
    const double bound = std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto v = vec_view(p.values, s);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  };
  for (const auto& s : layout.slices()) {
    const auto ends_with = [&](const char* suffix) {
      const std::string suf(suffix);
      return s.name.size() >= suf.size() && s.name.compare(s.name.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (ends_with(".scale")) {
      vec_view(p.values, s).setOnes();
    } else if (ends_with("weight") || ends_with("w_input") || ends_with("w_hidden")) {
      // Rows of every weight matrix index the inputs.
      fill_uniform(s, static_cast<double>(s.rows));
    }
  }
  return p;
}

namespace {

GruWeights gru_weights(const ModelParams& p, const ParamLayout& layout, int layer, int dir) {
  return GruWeights{view(p.values, layout.slice(ParamLayout::gru(layer, dir, "w_input"))),
                    view(p.values, layout.slice(ParamLayout::gru(layer, dir, "w_hidden"))),
                    vec_view(p.values, layout.slice(ParamLayout::gru(layer, dir, "b_input"))),
                    vec_view(p.values, layout.slice(ParamLayout::gru(layer, dir, "b_hidden")))};
}

}  // namespace

ForwardOutput forward(const ModelParams& p, const FeatureMatrix& x, ForwardCache* cache) {
  const ArchConfig& arch = p.arch;
  const ParamLayout layout(arch);
  require(p.values.size() == layout.total(), "forward: parameter vector does not match the architecture");
  const int T = x.frames();
  require(T >= 1, "forward: empty feature matrix");
  if (x.bins() != arch.n_mels) {
    fail("forward: feature matrix has " + std::to_string(x.bins()) + " mel bins, model expects " +
         std::to_string(arch.n_mels));
  }
  if (!x.values.allFinite()) fail("forward: non-finite input features");

  int F = arch.n_mels;
  Matrix a(static_cast<Eigen::Index>(T) * F, 1);
  for (int t = 0; t < T; ++t) a.middleRows(static_cast<Eigen::Index>(t) * F, F) = x.values.row(t).transpose();

  if (cache) {
    cache->conv.clear();
    cache->gru.clear();
  }
  for (std::size_t b = 0; b < arch.conv_blocks.size(); ++b) {
    const int bi = static_cast<int>(b);
    ForwardCache::ConvBlock blk;
    blk.frames = T;
    blk.freq_in = F;
    blk.col = layers::im2col3x3(a, T, F);
    blk.conv_out.noalias() = blk.col * view(p.values, layout.slice(ParamLayout::conv_weight(bi)));
    blk.relu_out = layers::relu_forward(layers::affine_forward(blk.conv_out,
                                                               vec_view(p.values, layout.slice(ParamLayout::norm_scale(bi))),
                                                               vec_view(p.values, layout.slice(ParamLayout::norm_shift(bi)))));
    blk.pool = layers::freq_maxpool_forward(blk.relu_out, T, F, arch.conv_blocks[b].freq_pool);
    F /= arch.conv_blocks[b].freq_pool;
    a = blk.pool.out;
    if (cache) {
      cache->conv.push_back(std::move(blk));
    }
  }

  const auto C = a.cols();
  Matrix seq(T, F * C);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) seq.block(t, f * C, 1, C) = a.row(static_cast<Eigen::Index>(t) * F + f);
  }

  const int H = arch.gru_hidden;
  for (int l = 0; l < arch.gru_layers; ++l) {
    ForwardCache::GruLayer gl;
    Matrix out(T, 2 * H);
    out.leftCols(H) = layers::gru_forward(seq, gru_weights(p, layout, l, 0), false, cache ? &gl.fwd : nullptr);
    out.rightCols(H) = layers::gru_forward(seq, gru_weights(p, layout, l, 1), true, cache ? &gl.bwd : nullptr);
    if (cache) {
      gl.input = std::move(seq);
      cache->gru.push_back(std::move(gl));
    }
    seq = std::move(out);
  }

  ForwardOutput o;
  o.embeddings = std::move(seq);
  o.sed_logits = layers::linear_forward(o.embeddings, view(p.values, layout.slice("sed.weight")),
                                        vec_view(p.values, layout.slice("sed.bias")));
  o.sod_logits = sod_head(p, o.embeddings);
  if (cache) cache->embeddings = o.embeddings;
  return o;
}

Matrix sod_head(const ModelParams& p, const Eigen::Ref<const Matrix>& embeddings) {
  const ParamLayout layout(p.arch);
  return layers::linear_forward(embeddings, view(p.values, layout.slice("sod.weight")),
                                vec_view(p.values, layout.slice("sod.bias")));
}

void accumulate_sod_head_grad(const ModelParams& p, const Eigen::Ref<const Matrix>& embeddings,
                              const Eigen::Ref<const Matrix>& d_logits, Gradients& grads) {
  const ParamLayout layout(p.arch);
  view(grads, layout.slice("sod.weight")).noalias() += embeddings.transpose() * d_logits;
  vec_view(grads, layout.slice("sod.bias")) += d_logits.colwise().sum().transpose();
}

Gradients backward(const ModelParams& p, const ForwardCache& cache, const OutputGrads& up) {
  const ArchConfig& arch = p.arch;
  const ParamLayout layout(arch);
  require(cache.conv.size() == arch.conv_blocks.size() && static_cast<int>(cache.gru.size()) == arch.gru_layers,
          "backward: cache does not belong to this architecture (forward was run without a cache?)");
  const auto& E = cache.embeddings;
  const auto T = E.rows();
  Gradients g = Gradients::Zero(layout.total());

  Matrix dE = up.embeddings.size() ? up.embeddings : Matrix::Zero(T, E.cols());
  require(dE.rows() == T && dE.cols() == E.cols(), "backward: embedding gradient has the wrong shape");
  if (up.sed_logits.size()) {
    require(up.sed_logits.rows() == T && up.sed_logits.cols() == arch.n_classes, "backward: SED gradient shape");
    view(g, layout.slice("sed.weight")).noalias() = E.transpose() * up.sed_logits;
    vec_view(g, layout.slice("sed.bias")) = up.sed_logits.colwise().sum().transpose();
    dE.noalias() += up.sed_logits * view(p.values, layout.slice("sed.weight")).transpose();
  }
  if (up.sod_logits.size()) {
    require(up.sod_logits.rows() == T && up.sod_logits.cols() == arch.sod_classes, "backward: SOD gradient shape");
    accumulate_sod_head_grad(p, E, up.sod_logits, g);
    dE.noalias() += up.sod_logits * view(p.values, layout.slice("sod.weight")).transpose();
  }

  const int H = arch.gru_hidden;
  for (int l = arch.gru_layers - 1; l >= 0; --l) {
    const auto& gl = cache.gru[static_cast<std::size_t>(l)];
    Matrix d_in = Matrix::Zero(gl.input.rows(), gl.input.cols());
    for (int d = 0; d < 2; ++d) {
      const auto w = gru_weights(p, layout, l, d);
      auto gg = layers::gru_backward(d == 0 ? dE.leftCols(H) : dE.rightCols(H), gl.input, w, d == 0 ? gl.fwd : gl.bwd);
      view(g, layout.slice(ParamLayout::gru(l, d, "w_input"))) = gg.d_w_input;
      view(g, layout.slice(ParamLayout::gru(l, d, "w_hidden"))) = gg.d_w_hidden;
      vec_view(g, layout.slice(ParamLayout::gru(l, d, "b_input"))) = gg.d_b_input;
      vec_view(g, layout.slice(ParamLayout::gru(l, d, "b_hidden"))) = gg.d_b_hidden;
      d_in += gg.d_input;
    }
    dE = std::move(d_in);
  }

  // Unflatten frame features back onto the last pooled map.
  const auto& last = cache.conv.back();
  const int F = last.pool.out.rows() / static_cast<int>(T);
  const auto C = last.pool.out.cols();
  Matrix da(last.pool.out.rows(), C);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) da.row(t * F + f) = dE.block(t, f * C, 1, C);
  }

  for (int b = static_cast<int>(arch.conv_blocks.size()) - 1; b >= 0; --b) {
    const auto& blk = cache.conv[static_cast<std::size_t>(b)];
    const Matrix d_relu = layers::freq_maxpool_backward(da, blk.pool.argmax, blk.relu_out.rows());
    const Matrix d_aff = layers::relu_backward(d_relu, blk.relu_out);
    auto ag = layers::affine_backward(d_aff, blk.conv_out, vec_view(p.values, layout.slice(ParamLayout::norm_scale(b))));
    vec_view(g, layout.slice(ParamLayout::norm_scale(b))) = ag.d_scale;
    vec_view(g, layout.slice(ParamLayout::norm_shift(b))) = ag.d_shift;
    const auto w = view(p.values, layout.slice(ParamLayout::conv_weight(b)));
    view(g, layout.slice(ParamLayout::conv_weight(b))).noalias() = blk.col.transpose() * ag.d_input;
    if (b > 0) {
      const Matrix dcol = ag.d_input * w.transpose();
      da = layers::col2im3x3(dcol, blk.frames, blk.freq_in, static_cast<int>(w.rows() / 9));
    }
  }
  return g;
}

AdamState AdamState::zeros(Eigen::Index n) {
  AdamState s;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  return s;
}

void adam_step(ModelParams& p, const Gradients& g, AdamState& s, double lr) {
  require(g.size() == p.values.size() && s.m.size() == g.size() && s.v.size() == g.size(),
          "adam_step: parameter, gradient and state shapes differ");
  if (!g.allFinite()) throw RuntimeAbort("adam_step: non-finite gradient");
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * g;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  p.values.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

double warmup_lr(int epoch, double base_lr, int warmup_epochs) {
  require(epoch >= 0, "warmup_lr: negative epoch");
  if (warmup_epochs <= 0 || epoch >= warmup_epochs) return base_lr;
  const double progress = static_cast<double>(epoch) / warmup_epochs;
  return base_lr * std::exp(-5.0 * (1.0 - progress) * (1.0 - progress));
}

}  // namespace eowsed

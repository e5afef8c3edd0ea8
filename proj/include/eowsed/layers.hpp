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

// Layer primitives for the CRNN, each with an explicit reverse pass.
//
// Conv feature maps are stored as (T*F) x C matrices: row t*F + f holds the
// channel vector of time frame t, mel bin f. Sequences are T x dim matrices.

#include <Eigen/Core>

#include "eowsed/common.hpp"

namespace eowsed::layers {

using ConstRef = Eigen::Ref<const Matrix>;
using ConstVecRef = Eigen::Ref<const Vector>;

/// Zero-padded 3x3 neighbourhoods: (T*F) x (9*C), column k*C + c with k = (dt+1)*3 + (df+1).
Matrix im2col3x3(const ConstRef& a, int frames, int freq);
/// Adjoint of im2col3x3 (scatter-add back onto the (T*F) x C grid).
Matrix col2im3x3(const ConstRef& dcol, int frames, int freq, int channels);

/// y = x * w + b over rows.
Matrix linear_forward(const ConstRef& x, const ConstRef& w, const ConstVecRef& b);

/// Per-channel scale/shift, no batch statistics.
Matrix affine_forward(const ConstRef& z, const ConstVecRef& scale, const ConstVecRef& shift);

struct AffineGrads {
  Vector d_scale;
  Vector d_shift;
  Matrix d_input;
};
AffineGrads affine_backward(const ConstRef& d_out, const ConstRef& z, const ConstVecRef& scale);

Matrix relu_forward(const ConstRef& x);
/// Passes gradient where the forward output was positive.
Matrix relu_backward(const ConstRef& d_out, const ConstRef& out);

struct PoolResult {
  Matrix out;               // (T*Fout) x C
  Eigen::MatrixXi argmax;  // source row per output cell
};
/// Max over non-overlapping groups of `pool` mel bins; trailing bins are dropped.
PoolResult freq_maxpool_forward(const ConstRef& a, int frames, int freq, int pool);
Matrix freq_maxpool_backward(const ConstRef& d_out, const Eigen::MatrixXi& argmax, Eigen::Index input_rows);

/// GRU weights for one direction; gate column blocks ordered [reset, update, candidate].
struct GruWeights {
  Eigen::Ref<const Matrix> w_input;   // I x 3H
  Eigen::Ref<const Matrix> w_hidden;  // H x 3H
  Eigen::Ref<const Vector> b_input;   // 3H
  Eigen::Ref<const Vector> b_hidden;  // 3H
};

struct GruCache {
  Matrix h_prev;    // T x H, state entering each step (indexed by frame)
  Matrix reset;     // T x H
  Matrix update;    // T x H
  Matrix cand;      // T x H
  Matrix hid_cand;  // T x H, h_prev * W_hn + b_hn
  bool reverse = false;
};

/// Runs over frames 0..T-1, or T-1..0 when reverse. Initial state is zero.
Matrix gru_forward(const ConstRef& x, const GruWeights& w, bool reverse, GruCache* cache);

struct GruGrads {
  Matrix d_w_input;
  Matrix d_w_hidden;
  Vector d_b_input;
  Vector d_b_hidden;
  Matrix d_input;
};
GruGrads gru_backward(const ConstRef& d_out, const ConstRef& x, const GruWeights& w, const GruCache& cache);

}  // namespace eowsed::layers

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

#include "eowsed/layers.hpp"

#include <cmath>

namespace eowsed::layers {

Matrix im2col3x3(const ConstRef& a, int frames, int freq) {
  const auto C = a.cols();
  Matrix col = Matrix::Zero(a.rows(), 9 * C);
  for (int dt = -1; dt <= 1; ++dt) {
    for (int df = -1; df <= 1; ++df) {
      const auto k = (dt + 1) * 3 + (df + 1);
      for (int t = 0; t < frames; ++t) {
        const int ts = t + dt;
        if (ts < 0 || ts >= frames) continue;
        const int f_lo = std::max(0, -df);
        const int f_hi = std::min(freq, freq - df);
        if (f_hi <= f_lo) continue;
        col.block(static_cast<Eigen::Index>(t) * freq + f_lo, k * C, f_hi - f_lo, C) =
            a.middleRows(static_cast<Eigen::Index>(ts) * freq + f_lo + df, f_hi - f_lo);
      }
    }
  }
  return col;
}

Matrix col2im3x3(const ConstRef& dcol, int frames, int freq, int channels) {
  Matrix da = Matrix::Zero(dcol.rows(), channels);
  for (int dt = -1; dt <= 1; ++dt) {
    for (int df = -1; df <= 1; ++df) {
      const auto k = (dt + 1) * 3 + (df + 1);
      for (int t = 0; t < frames; ++t) {
        const int ts = t + dt;
        if (ts < 0 || ts >= frames) continue;
        const int f_lo = std::max(0, -df);
        const int f_hi = std::min(freq, freq - df);
        if (f_hi <= f_lo) continue;
        da.middleRows(static_cast<Eigen::Index>(ts) * freq + f_lo + df, f_hi - f_lo) +=
            dcol.block(static_cast<Eigen::Index>(t) * freq + f_lo, k * channels, f_hi - f_lo, channels);
      }
    }
  }
  return da;
}

Matrix linear_forward(const ConstRef& x, const ConstRef& w, const ConstVecRef& b) {
  Matrix y = x * w;
  y.rowwise() += b.transpose();
  return y;
}

Matrix affine_forward(const ConstRef& z, const ConstVecRef& scale, const ConstVecRef& shift) {
  Matrix y = z * scale.asDiagonal();
  y.rowwise() += shift.transpose();
  return y;
}

AffineGrads affine_backward(const ConstRef& d_out, const ConstRef& z, const ConstVecRef& scale) {
  AffineGrads g;
  g.d_scale = (d_out.array() * z.array()).colwise().sum().transpose();
  g.d_shift = d_out.colwise().sum().transpose();
  g.d_input = d_out * scale.asDiagonal();
  return g;
}

Matrix relu_forward(const ConstRef& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const ConstRef& d_out, const ConstRef& out) {
  return (out.array() > 0.0).select(d_out, 0.0);
}

PoolResult freq_maxpool_forward(const ConstRef& a, int frames, int freq, int pool) {
  require(pool >= 1 && freq >= pool, "freq_maxpool: pool factor exceeds mel axis");
  const int f_out = freq / pool;
  const auto C = a.cols();
  PoolResult r;
  r.out.resize(static_cast<Eigen::Index>(frames) * f_out, C);
  r.argmax.resize(r.out.rows(), C);
  for (Eigen::Index c = 0; c < C; ++c) {
    for (int t = 0; t < frames; ++t) {
      for (int fo = 0; fo < f_out; ++fo) {
        const Eigen::Index base = static_cast<Eigen::Index>(t) * freq + static_cast<Eigen::Index>(fo) * pool;
        Eigen::Index best = base;
        for (int j = 1; j < pool; ++j) {
          if (a(base + j, c) > a(best, c)) best = base + j;
        }
        const Eigen::Index o = static_cast<Eigen::Index>(t) * f_out + fo;
        r.out(o, c) = a(best, c);
        r.argmax(o, c) = static_cast<int>(best);
      }
    }
  }
  return r;
}

Matrix freq_maxpool_backward(const ConstRef& d_out, const Eigen::MatrixXi& argmax, Eigen::Index input_rows) {
  Matrix d = Matrix::Zero(input_rows, d_out.cols());
  for (Eigen::Index c = 0; c < d_out.cols(); ++c) {
    for (Eigen::Index o = 0; o < d_out.rows(); ++o) d(argmax(o, c), c) += d_out(o, c);
  }
  return d;
}

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Matrix gru_forward(const ConstRef& x, const GruWeights& w, bool reverse, GruCache* cache) {
  const auto T = x.rows();
  const auto H = w.w_hidden.rows();
  require(w.w_input.rows() == x.cols() && w.w_input.cols() == 3 * H && w.w_hidden.cols() == 3 * H,
          "gru_forward: weight shapes do not match input");
  const Matrix gx = linear_forward(x, w.w_input, w.b_input);  // T x 3H
  Matrix out(T, H);
  if (cache) {
    cache->reverse = reverse;
    cache->h_prev.resize(T, H);
    cache->reset.resize(T, H);
    cache->update.resize(T, H);
    cache->cand.resize(T, H);
    cache->hid_cand.resize(T, H);
  }
  RowVector h = RowVector::Zero(H);
  RowVector gh(3 * H);
  RowVector r(H), z(H), n(H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    gh.noalias() = h * w.w_hidden;
    gh += w.b_hidden.transpose();
    for (Eigen::Index j = 0; j < H; ++j) {
      r[j] = sigmoid(gx(t, j) + gh[j]);
      z[j] = sigmoid(gx(t, H + j) + gh[H + j]);
      n[j] = std::tanh(gx(t, 2 * H + j) + r[j] * gh[2 * H + j]);
    }
    if (cache) {
      cache->h_prev.row(t) = h;
      cache->reset.row(t) = r;
      cache->update.row(t) = z;
      cache->cand.row(t) = n;
      cache->hid_cand.row(t) = gh.tail(H);
    }
    h = (1.0 - z.array()) * n.array() + z.array() * h.array();
    out.row(t) = h;
  }
  return out;
}

GruGrads gru_backward(const ConstRef& d_out, const ConstRef& x, const GruWeights& w, const GruCache& cache) {
  const auto T = x.rows();
  const auto H = w.w_hidden.rows();
  GruGrads g;
  g.d_w_hidden = Matrix::Zero(H, 3 * H);
  g.d_b_hidden = Vector::Zero(3 * H);
  Matrix d_gx(T, 3 * H);
  Matrix d_gh_all(T, 3 * H);
  RowVector dh = RowVector::Zero(H);
  RowVector d_gh(3 * H);
  for (Eigen::Index s = 0; s < T; ++s) {
    // Reverse of the processing order.
    const Eigen::Index t = cache.reverse ? s : T - 1 - s;
    dh += d_out.row(t);
    const auto r = cache.reset.row(t).array();
    const auto z = cache.update.row(t).array();
    const auto n = cache.cand.row(t).array();
    const auto hp = cache.h_prev.row(t).array();
    const Eigen::ArrayXXd dn = dh.array() * (1.0 - z);
    const Eigen::ArrayXXd dz = dh.array() * (hp - n);
    const Eigen::ArrayXXd dan = dn * (1.0 - n * n);
    const Eigen::ArrayXXd dr = dan * cache.hid_cand.row(t).array();
    const Eigen::ArrayXXd dar = dr * r * (1.0 - r);
    const Eigen::ArrayXXd daz = dz * z * (1.0 - z);
    d_gx.row(t) << dar, daz, dan;
    d_gh << dar, daz, dan * r;
    d_gh_all.row(t) = d_gh;
    dh = (dh.array() * z).matrix() + d_gh * w.w_hidden.transpose();
  }
  g.d_w_hidden.noalias() = cache.h_prev.transpose() * d_gh_all;
  g.d_b_hidden = d_gh_all.colwise().sum().transpose();
  g.d_w_input.noalias() = x.transpose() * d_gx;
  g.d_b_input = d_gx.colwise().sum().transpose();
  g.d_input.noalias() = d_gx * w.w_input.transpose();
  return g;
}

}  // namespace eowsed::layers

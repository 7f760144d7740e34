// Copyright 2026 The pointda Authors
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

#include "pointda/layers.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Core>
#include <fmt/format.h>

#include "pointda/error.hpp"

namespace pointda {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Eigen picks its vectorization peeling from each pointer's runtime alignment,
// which changes the float summation order. Keeping every GEMM operand at a
// fixed alignment makes results independent of where the heap put a buffer.
constexpr std::size_t kAlignFloats = 16;  // 64 bytes

std::size_t padded(std::size_t n) { return (n + kAlignFloats - 1) / kAlignFloats * kAlignFloats; }

float* aligned_base(std::vector<float>& buf) {
  const auto addr = reinterpret_cast<std::uintptr_t>(buf.data());
  const std::uintptr_t mask = kAlignFloats * sizeof(float) - 1;
  return reinterpret_cast<float*>((addr + mask) & ~mask);
}

void im2col(const float* img, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* col) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride - pad + ky;
          float* dst = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.0f);
            continue;
          }
          const float* src = img + (static_cast<std::size_t>(ch) * h + iy) * w;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * stride - pad + kx;
            dst[x] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* img) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          float* dst = img + (static_cast<std::size_t>(ch) * h + iy) * w;
          const float* src = row + static_cast<std::size_t>(y) * ow;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               int pad)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_(name + ".bias", static_cast<std::size_t>(out_channels)) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || pad < 0) {
    throw InvalidArgument(fmt::format("bad conv geometry for {}", name));
  }
}

void Conv2d::init(std::mt19937_64& rng, double gain) {
  const double fan_in = static_cast<double>(in_) * kernel_ * kernel_;
  const auto bound = static_cast<float>(gain * std::sqrt(6.0 / fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : weight_.value) v = dist(rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.channels() != in_) {
    throw InvalidInput(fmt::format("{} expects {} input channels, got {}", weight_.name, in_,
                                   x.channels()));
  }
  const int n = x.batch(), h = x.height(), w = x.width();
  const int oh = output_size(h), ow = output_size(w);
  const int kdim = in_ * kernel_ * kernel_;
  const Eigen::Index p = static_cast<Eigen::Index>(oh) * ow;
  const std::size_t col_stride = padded(static_cast<std::size_t>(kdim) * p);
  cols_.resize(col_stride * n + kAlignFloats);
  cached_n_ = n;
  cached_h_ = h;
  cached_w_ = w;
  cached_oh_ = oh;
  cached_ow_ = ow;

  Tensor y(n, out_, oh, ow);
  const RowMat wmat = ConstMapMat(weight_.value.data(), out_, kdim);
  RowMat out(out_, p);
  float* cols = aligned_base(cols_);
  for (int s = 0; s < n; ++s) {
    float* col = cols + col_stride * s;
    im2col(x.sample(s).data(), in_, h, w, kernel_, stride_, pad_, oh, ow, col);
    out.noalias() = wmat * ConstMapMat(col, kdim, p);
    float* dst = y.sample(s).data();
    for (int o = 0; o < out_; ++o) {
      const float b = bias_.value[o];
      for (Eigen::Index i = 0; i < p; ++i) dst[o * p + i] = out(o, i) + b;
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool need_input_grad) {
  const int n = cached_n_, oh = cached_oh_, ow = cached_ow_;
  if (grad_out.batch() != n || grad_out.channels() != out_ || grad_out.height() != oh ||
      grad_out.width() != ow) {
    throw InvalidArgument(fmt::format("{} backward shape mismatch", weight_.name));
  }
  const int kdim = in_ * kernel_ * kernel_;
  const Eigen::Index p = static_cast<Eigen::Index>(oh) * ow;
  const std::size_t col_stride = padded(static_cast<std::size_t>(kdim) * p);

  Tensor dx;
  if (need_input_grad) dx = Tensor(n, in_, cached_h_, cached_w_);
  RowMat dcol(need_input_grad ? kdim : 0, p);
  RowMat dy(out_, p);
  RowMat dw = RowMat::Zero(frozen_ ? 0 : out_, kdim);
  const RowMat wmat = ConstMapMat(weight_.value.data(), out_, kdim);
  const float* cols = aligned_base(cols_);
  for (int s = 0; s < n; ++s) {
    dy = ConstMapMat(grad_out.sample(s).data(), out_, p);
    const ConstMapMat col(cols + col_stride * s, kdim, p);
    if (!frozen_) {
      dw.noalias() += dy * col.transpose();
      for (int o = 0; o < out_; ++o) {
        float acc = 0.0f;
        for (Eigen::Index i = 0; i < p; ++i) acc += dy(o, i);
        bias_.grad[o] += acc;
      }
    }
    if (need_input_grad) {
      dcol.noalias() = wmat.transpose() * dy;
      col2im(dcol.data(), in_, cached_h_, cached_w_, kernel_, stride_, pad_, oh, ow,
             dx.sample(s).data());
    }
  }
  if (!frozen_) {
    for (std::size_t i = 0; i < weight_.grad.size(); ++i) weight_.grad[i] += dw.data()[i];
  }
  return dx;
}

Tensor Relu::forward(const Tensor& x) {
  out_ = x;
  for (float& v : out_.values()) v = v > 0.0f ? v : 0.0f;
  return out_;
}

Tensor Relu::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor dx = grad_out;
  auto& d = dx.values();
  const auto& o = out_.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (o[i] <= 0.0f) d[i] = 0.0f;
  }
  return dx;
}

Tensor LeakyRelu::forward(const Tensor& x) {
  in_ = x;
  Tensor y = x;
  for (float& v : y.values()) v = v > 0.0f ? v : slope_ * v;
  return y;
}

Tensor LeakyRelu::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor dx = grad_out;
  auto& d = dx.values();
  const auto& in = in_.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (in[i] <= 0.0f) d[i] *= slope_;
  }
  return dx;
}

Tensor MaxPool2::forward(const Tensor& x) {
  in_n_ = x.batch();
  in_c_ = x.channels();
  in_h_ = x.height();
  in_w_ = x.width();
  const int oh = (in_h_ + 1) / 2, ow = (in_w_ + 1) / 2;
  Tensor y(in_n_, in_c_, oh, ow);
  argmax_.assign(y.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < in_n_; ++n) {
    for (int c = 0; c < in_c_; ++c) {
      for (int py = 0; py < oh; ++py) {
        for (int px = 0; px < ow; ++px, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::uint32_t best_idx = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = 2 * py + dy, ix = 2 * px + dx;
              if (iy >= in_h_ || ix >= in_w_) continue;
              const float v = x.at(n, c, iy, ix);
              if (v > best) {
                best = v;
                best_idx = static_cast<std::uint32_t>(iy * in_w_ + ix);
              }
            }
          }
          y.values()[o] = best;
          argmax_[o] = best_idx;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor dx(in_n_, in_c_, in_h_, in_w_);
  const std::size_t out_plane = grad_out.plane();
  const std::size_t in_plane = dx.plane();
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    const std::size_t map = o / out_plane;
    dx.values()[map * in_plane + argmax_[o]] += grad_out.values()[o];
  }
  return dx;
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out, bool need_input_grad) {
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, i > 0 || need_input_grad);
  }
  return need_input_grad ? g : Tensor{};
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

void Sequential::set_frozen_all(bool frozen) {
  set_frozen(frozen);
  for (auto& layer : layers_) layer->set_frozen(frozen);
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace pointda

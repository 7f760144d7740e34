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

// Minimal layer stack with explicit forward/backward passes. Each layer caches
// what it needs from the most recent forward call, so forward and backward must
// be paired on the same batch.

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pointda/tensor.hpp"

namespace pointda {

struct Parameter {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t count)
      : name(std::move(n)), value(count, 0.0f), grad(count, 0.0f) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  /// Accumulates parameter gradients unless frozen. Returns dL/dx when
  /// `need_input_grad`, otherwise an empty tensor.
  virtual Tensor backward(const Tensor& grad_out, bool need_input_grad) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }

  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

 protected:
  bool frozen_ = false;
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad);

  /// Kaiming-uniform weights scaled by `gain`, zero bias.
  void init(std::mt19937_64& rng, double gain = 1.0);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int output_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_, out_, kernel_, stride_, pad_;
  Parameter weight_;  // (out, in * k * k), row-major
  Parameter bias_;
  // Cached im2col buffers, one (in*k*k, oh*ow) block per sample.
  std::vector<float> cols_;  // im2col buffers, over-allocated so they can be 64-byte aligned
  int cached_n_ = 0, cached_h_ = 0, cached_w_ = 0, cached_oh_ = 0, cached_ow_ = 0;
};

class Relu : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;

 private:
  Tensor out_;
};

class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(float slope) : slope_(slope) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;

 private:
  float slope_;
  Tensor in_;
};

/// 2x2 max pooling with ceil rounding (output = ceil(input / 2)).
class MaxPool2 : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;

 private:
  std::vector<std::uint32_t> argmax_;
  int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

class Sequential : public Layer {
 public:
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<Parameter*> parameters() override;

  void set_frozen_all(bool frozen);
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace pointda

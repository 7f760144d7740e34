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

// Point proposal network (backbone + offset/class heads) and the fully
// convolutional domain discriminator.
//
// Head channel layout, for slot k of a cell:
//   offset head: channel 2k -> delta_i (x), 2k+1 -> delta_j (y), tanh-squashed
//   class head:  channel 2k -> pos logit,   2k+1 -> neg logit, softmax per pair
// The discriminator input concatenates offsets (channels 0..2D-1) and class
// probabilities (channels 2D..4D-1) in the same k-major order.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pointda/geometry.hpp"
#include "pointda/layers.hpp"
#include "pointda/losses.hpp"
#include "pointda/tensor.hpp"

namespace pointda {

enum class BackboneVariant { tiny, vgg_like };

BackboneVariant parse_backbone_variant(const std::string& s);
const char* to_string(BackboneVariant v);

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::tiny;
  int stride = 8;          // power of two
  int channels = 64;       // feature depth at the backbone output
  int depth = 4;           // conv stages; the first log2(stride) downsample by 2
  int slots_per_cell = 4;  // D

  int downsample_stages() const;
  /// Throws InvalidArgument unless stride is a power of two, depth covers the
  /// downsampling stages and the sizes are positive.
  void validate() const;
};

struct DiscriminatorConfig {
  int channels = 32;
  int layers = 4;  // each stride 2
  float leaky_slope = 0.2f;
};

struct PredictionMaps {
  OffsetMap offsets;      // (W, H, D, 2) in [-1, 1]
  ClassificationMap cls;  // (W, H, D, 2), pairs sum to 1
};

/// Gradients of a scalar loss with respect to one image's PredictionMaps.
struct PredictionGrads {
  OffsetMap offsets;
  ClassificationMap cls;

  static PredictionGrads zeros_like(const PredictionMaps& m) {
    return {SlotTensor(m.offsets.width(), m.offsets.height(), m.offsets.depth(), 2),
            SlotTensor(m.cls.width(), m.cls.height(), m.cls.depth(), 2)};
  }
};

/// (p_pos, p_neg) = softmax(pos_logit, neg_logit), computed in double.
std::pair<double, double> softmax_pair(double pos_logit, double neg_logit);

class PointProposalNet {
 public:
  PointProposalNet(const BackboneConfig& config, std::uint64_t seed);

  /// `images` is (N, 3, H, W) RGB in [0, 1]. Throws InvalidInput for other
  /// channel counts.
  std::vector<PredictionMaps> forward(const Tensor& images);

  /// Backpropagates per-image gradients from the most recent forward call and
  /// accumulates parameter gradients.
  void backward(const std::vector<PredictionGrads>& grads);

  AnchorGrid grid_for(int image_w, int image_h) const;
  const BackboneConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  void zero_grad() { zero_grads(parameters()); }

  /// Raw class logits from the last forward, (N, 2D, H, W).
  const Tensor& last_class_logits() const { return class_logits_; }

 private:
  BackboneConfig config_;
  Sequential backbone_;
  Conv2d offset_head_;
  Conv2d class_head_;
  Tensor offsets_;        // tanh outputs
  Tensor class_logits_;
  std::vector<PredictionMaps> last_;
};

class Discriminator {
 public:
  Discriminator(int in_channels, const DiscriminatorConfig& config, std::uint64_t seed);

  /// `concat` is (N, 4D, H, W); returns one DomainMap per sample tagged with
  /// `domain`. Throws InvalidInput on channel mismatch.
  std::vector<DomainMap> forward(const Tensor& concat, Domain domain);

  /// Backpropagates d(loss)/d(D_X, D_Y). Parameter gradients are accumulated
  /// only while not frozen. Returns d(loss)/d(concat) when `need_input_grad`.
  Tensor backward(const std::vector<DomainMap>& grads, bool need_input_grad);

  void set_frozen(bool frozen) { net_.set_frozen_all(frozen); }
  std::vector<Parameter*> parameters() { return net_.parameters(); }
  void zero_grad() { zero_grads(parameters()); }
  int in_channels() const { return in_channels_; }
  int output_size(int in) const;

 private:
  int in_channels_;
  DiscriminatorConfig config_;
  Sequential net_;
  Tensor probs_;  // (N, 2, H', W') softmax output of the last forward
};

/// Channel-axis concatenation of offsets and class probabilities into a
/// (N, 4D, H, W) tensor.
Tensor concat_predictions(const std::vector<PredictionMaps>& maps);

/// Inverse of concat_predictions for one sample; also used to route
/// discriminator input gradients back to the heads.
PredictionMaps split_concat(const Tensor& concat, int sample);

}  // namespace pointda

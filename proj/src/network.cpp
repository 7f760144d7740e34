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

#include "pointda/network.hpp"

#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "pointda/error.hpp"

namespace pointda {

BackboneVariant parse_backbone_variant(const std::string& s) {
  if (s == "tiny") return BackboneVariant::tiny;
  if (s == "vgg-like" || s == "vgg_like") return BackboneVariant::vgg_like;
  throw InvalidArgument(fmt::format("unknown backbone variant '{}' (tiny, vgg-like)", s));
}

const char* to_string(BackboneVariant v) {
  return v == BackboneVariant::tiny ? "tiny" : "vgg-like";
}

int BackboneConfig::downsample_stages() const {
  return std::countr_zero(static_cast<unsigned>(stride));
}

void BackboneConfig::validate() const {
  if (stride < 1 || !std::has_single_bit(static_cast<unsigned>(stride))) {
    throw InvalidArgument(fmt::format("backbone stride must be a power of two, got {}", stride));
  }
  if (channels < 1 || slots_per_cell < 1) {
    throw InvalidArgument("backbone channels and slots_per_cell must be positive");
  }
  if (depth < downsample_stages() || depth < 1) {
    throw InvalidArgument(fmt::format("backbone depth {} cannot reach stride {}", depth, stride));
  }
}

std::pair<double, double> softmax_pair(double pos_logit, double neg_logit) {
  const double m = std::max(pos_logit, neg_logit);
  const double ep = std::exp(pos_logit - m);
  const double en = std::exp(neg_logit - m);
  const double z = ep + en;
  return {ep / z, en / z};
}

namespace {

void build_backbone(Sequential& seq, const BackboneConfig& cfg, std::mt19937_64& rng) {
  const int downs = cfg.downsample_stages();
  int in = 3;
  for (int stage = 0; stage < cfg.depth; ++stage) {
    const bool down = stage < downs;
    // Widths double per downsampling stage and reach `channels` at the last one.
    const int width = down ? std::max(4, cfg.channels >> (downs - 1 - stage)) : cfg.channels;
    const std::string name = fmt::format("backbone.{}", stage);
    if (cfg.variant == BackboneVariant::tiny) {
      seq.emplace<Conv2d>(name, in, width, 3, down ? 2 : 1, 1).init(rng);
      seq.emplace<Relu>();
    } else {
      seq.emplace<Conv2d>(name + "a", in, width, 3, 1, 1).init(rng);
      seq.emplace<Relu>();
      seq.emplace<Conv2d>(name + "b", width, width, 3, 1, 1).init(rng);
      seq.emplace<Relu>();
      if (down) seq.emplace<MaxPool2>();
    }
    in = width;
  }
}

}  // namespace

PointProposalNet::PointProposalNet(const BackboneConfig& config, std::uint64_t seed)
    : config_(config),
      offset_head_("head.offset", config.channels, 2 * config.slots_per_cell, 1, 1, 0),
      class_head_("head.class", config.channels, 2 * config.slots_per_cell, 1, 1, 0) {
  config_.validate();
  std::mt19937_64 rng(seed);
  build_backbone(backbone_, config_, rng);
  offset_head_.init(rng, 0.1);
  class_head_.init(rng, 0.1);
}

AnchorGrid PointProposalNet::grid_for(int image_w, int image_h) const {
  return build_anchor_grid(image_w, image_h, config_.stride, config_.slots_per_cell);
}

std::vector<Parameter*> PointProposalNet::parameters() {
  auto params = backbone_.parameters();
  for (Parameter* p : offset_head_.parameters()) params.push_back(p);
  for (Parameter* p : class_head_.parameters()) params.push_back(p);
  return params;
}

std::vector<PredictionMaps> PointProposalNet::forward(const Tensor& images) {
  if (images.channels() != 3) {
    throw InvalidInput(fmt::format("expected RGB input (3 channels), got {}", images.channels()));
  }
  const AnchorGrid grid = grid_for(images.width(), images.height());
  const Tensor features = backbone_.forward(images);
  if (features.width() != grid.feat_w || features.height() != grid.feat_h) {
    throw InvalidInput(fmt::format("backbone produced {}x{} features, grid expects {}x{}",
                                   features.width(), features.height(), grid.feat_w, grid.feat_h));
  }
  offsets_ = offset_head_.forward(features);
  for (float& v : offsets_.values()) v = std::tanh(v);
  class_logits_ = class_head_.forward(features);

  const int d = config_.slots_per_cell;
  last_.clear();
  last_.reserve(images.batch());
  for (int n = 0; n < images.batch(); ++n) {
    PredictionMaps m{SlotTensor(grid.feat_w, grid.feat_h, d, 2),
                     SlotTensor(grid.feat_w, grid.feat_h, d, 2)};
    for (int j = 0; j < grid.feat_h; ++j) {
      for (int i = 0; i < grid.feat_w; ++i) {
        for (int k = 0; k < d; ++k) {
          m.offsets.at(i, j, k, 0) = offsets_.at(n, 2 * k, j, i);
          m.offsets.at(i, j, k, 1) = offsets_.at(n, 2 * k + 1, j, i);
          const auto [p, q] =
              softmax_pair(class_logits_.at(n, 2 * k, j, i), class_logits_.at(n, 2 * k + 1, j, i));
          m.cls.at(i, j, k, 0) = p;
          m.cls.at(i, j, k, 1) = q;
        }
      }
    }
    last_.push_back(std::move(m));
  }
  return last_;
}

void PointProposalNet::backward(const std::vector<PredictionGrads>& grads) {
  if (grads.size() != last_.size()) {
    throw InvalidArgument("backward called with a different batch size than forward");
  }
  Tensor d_offsets(offsets_.batch(), offsets_.channels(), offsets_.height(), offsets_.width());
  Tensor d_logits(d_offsets.batch(), d_offsets.channels(), d_offsets.height(), d_offsets.width());
  const int d = config_.slots_per_cell;
  for (int n = 0; n < static_cast<int>(grads.size()); ++n) {
    const auto& g = grads[n];
    const auto& m = last_[n];
    if (!g.offsets.same_shape(m.offsets) || !g.cls.same_shape(m.cls)) {
      throw InvalidArgument("prediction gradient shape mismatch");
    }
    for (int j = 0; j < m.cls.height(); ++j) {
      for (int i = 0; i < m.cls.width(); ++i) {
        for (int k = 0; k < d; ++k) {
          for (int c = 0; c < 2; ++c) {
            const double t = m.offsets.at(i, j, k, c);
            d_offsets.at(n, 2 * k + c, j, i) =
                static_cast<float>(g.offsets.at(i, j, k, c) * (1.0 - t * t));
          }
          const double p = m.cls.at(i, j, k, 0);
          const double q = m.cls.at(i, j, k, 1);
          const double gp = g.cls.at(i, j, k, 0);
          const double gq = g.cls.at(i, j, k, 1);
          const double dot = p * gp + q * gq;
          d_logits.at(n, 2 * k, j, i) = static_cast<float>(p * (gp - dot));
          d_logits.at(n, 2 * k + 1, j, i) = static_cast<float>(q * (gq - dot));
        }
      }
    }
  }
  Tensor d_features = offset_head_.backward(d_offsets, true);
  const Tensor d_features_cls = class_head_.backward(d_logits, true);
  auto& df = d_features.values();
  const auto& dc = d_features_cls.values();
  for (std::size_t i = 0; i < df.size(); ++i) df[i] += dc[i];
  backbone_.backward(d_features, false);
}

Discriminator::Discriminator(int in_channels, const DiscriminatorConfig& config,
                             std::uint64_t seed)
    : in_channels_(in_channels), config_(config) {
  if (config.layers < 1 || config.channels < 1) {
    throw InvalidArgument("discriminator needs at least one layer and one channel");
  }
  std::mt19937_64 rng(seed);
  int in = in_channels;
  for (int l = 0; l < config.layers; ++l) {
    const bool last = l + 1 == config.layers;
    const int out = last ? 2 : config.channels;
    net_.emplace<Conv2d>(fmt::format("disc.{}", l), in, out, 3, 2, 1).init(rng, last ? 0.1 : 1.0);
    if (!last) net_.emplace<LeakyRelu>(config.leaky_slope);
    in = out;
  }
}

int Discriminator::output_size(int in) const {
  int s = in;
  for (int l = 0; l < config_.layers; ++l) s = (s + 1) / 2;
  return s;
}

std::vector<DomainMap> Discriminator::forward(const Tensor& concat, Domain domain) {
  if (concat.channels() != in_channels_) {
    throw InvalidInput(fmt::format("discriminator expects {} channels, got {}", in_channels_,
                                   concat.channels()));
  }
  const Tensor logits = net_.forward(concat);
  probs_ = Tensor(logits.batch(), 2, logits.height(), logits.width());
  std::vector<DomainMap> out;
  out.reserve(logits.batch());
  for (int n = 0; n < logits.batch(); ++n) {
    DomainMap m(logits.width(), logits.height(), domain);
    for (int y = 0; y < logits.height(); ++y) {
      for (int x = 0; x < logits.width(); ++x) {
        const auto [px, py] = softmax_pair(logits.at(n, 0, y, x), logits.at(n, 1, y, x));
        const std::size_t cell = static_cast<std::size_t>(y) * logits.width() + x;
        m.probs[cell * 2] = px;
        m.probs[cell * 2 + 1] = py;
        probs_.at(n, 0, y, x) = static_cast<float>(px);
        probs_.at(n, 1, y, x) = static_cast<float>(py);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

Tensor Discriminator::backward(const std::vector<DomainMap>& grads, bool need_input_grad) {
  if (static_cast<int>(grads.size()) != probs_.batch()) {
    throw InvalidArgument("discriminator backward batch size mismatch");
  }
  Tensor d_logits(probs_.batch(), 2, probs_.height(), probs_.width());
  for (int n = 0; n < probs_.batch(); ++n) {
    for (int y = 0; y < probs_.height(); ++y) {
      for (int x = 0; x < probs_.width(); ++x) {
        const std::size_t cell = static_cast<std::size_t>(y) * probs_.width() + x;
        const double px = probs_.at(n, 0, y, x), py = probs_.at(n, 1, y, x);
        const double gx = grads[n].probs[cell * 2], gy = grads[n].probs[cell * 2 + 1];
        const double dot = px * gx + py * gy;
        d_logits.at(n, 0, y, x) = static_cast<float>(px * (gx - dot));
        d_logits.at(n, 1, y, x) = static_cast<float>(py * (gy - dot));
      }
    }
  }
  return net_.backward(d_logits, need_input_grad);
}

Tensor concat_predictions(const std::vector<PredictionMaps>& maps) {
  if (maps.empty()) return {};
  const int w = maps[0].offsets.width(), h = maps[0].offsets.height(), d = maps[0].offsets.depth();
  Tensor out(static_cast<int>(maps.size()), 4 * d, h, w);
  for (int n = 0; n < static_cast<int>(maps.size()); ++n) {
    const auto& m = maps[n];
    if (!m.offsets.same_shape(maps[0].offsets) || !m.cls.same_shape(maps[0].offsets)) {
      throw InvalidArgument("prediction maps in a batch must share one shape");
    }
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        for (int k = 0; k < d; ++k) {
          for (int c = 0; c < 2; ++c) {
            out.at(n, 2 * k + c, j, i) = static_cast<float>(m.offsets.at(i, j, k, c));
            out.at(n, 2 * d + 2 * k + c, j, i) = static_cast<float>(m.cls.at(i, j, k, c));
          }
        }
      }
    }
  }
  return out;
}

PredictionMaps split_concat(const Tensor& concat, int sample) {
  if (concat.channels() % 4 != 0) throw InvalidArgument("concat channel count is not 4D");
  const int d = concat.channels() / 4, w = concat.width(), h = concat.height();
  PredictionMaps m{SlotTensor(w, h, d, 2), SlotTensor(w, h, d, 2)};
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      for (int k = 0; k < d; ++k) {
        for (int c = 0; c < 2; ++c) {
          m.offsets.at(i, j, k, c) = concat.at(sample, 2 * k + c, j, i);
          m.cls.at(i, j, k, c) = concat.at(sample, 2 * d + 2 * k + c, j, i);
        }
      }
    }
  }
  return m;
}

}  // namespace pointda

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

// Training objectives for the point proposal network and the domain
// discriminator. Each loss optionally writes d(loss)/d(input) into `grad`,
// which must be null or already shaped like the input; gradients are
// accumulated (added), never overwritten.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointda/geometry.hpp"
#include "pointda/matching.hpp"

namespace pointda {

/// Floor applied to every probability before taking a log.
inline constexpr double kProbEpsilon = 1e-12;

enum class Domain : int { source = 0, target = 1 };

const char* to_string(Domain d);

/// Per-slot (cls_pos, cls_neg).
using ClassificationMap = SlotTensor;
/// Per-slot binary entropy in [0, 1], one component.
using EntropyMap = SlotTensor;

/// Discriminator output: (D_X, D_Y) per output cell, plus the domain of the
/// sample it was computed from.
struct DomainMap {
  int width = 0;
  int height = 0;
  Domain domain = Domain::source;
  std::vector<double> probs;  // (y * width + x) * 2 + {0: D_X, 1: D_Y}

  DomainMap() = default;
  DomainMap(int w, int h, Domain d, double fill = 0.5)
      : width(w), height(h), domain(d), probs(static_cast<std::size_t>(w) * h * 2, fill) {}
  std::size_t num_cells() const { return static_cast<std::size_t>(width) * height; }
};

struct LossWeights {
  double loc = 1.0;
  double cls = 1.0;
  double ent = 0.1;
  double adv = 0.001;

  /// Throws InvalidArgument on negative or non-finite weights.
  void validate() const;
};

enum class LengthUnit { pixels, strides };

/// Spatial reduction for the discriminator/adversarial losses: `sum` is the
/// literal form, `mean` divides by the number of output cells.
enum class SpatialReduction { sum, mean };

struct LocationLoss {
  double value = 0.0;
  bool empty = false;  // no matched slots; value is 0 and no gradient flows
};

/// Mean Euclidean distance between decoded predictions and decoded targets
/// over the matched slots. Gradient is taken w.r.t. the raw offsets; at zero
/// distance the subgradient 0 is used.
LocationLoss location_loss(const OffsetMap& pred, const std::vector<LocationTarget>& targets,
                           const AnchorGrid& grid, LengthUnit unit = LengthUnit::pixels,
                           OffsetMap* grad = nullptr);

/// Mean two-class cross entropy over all slots; `positive[s]` is the one-hot
/// target of slot s. Natural log.
double classification_loss(const ClassificationMap& probs, const std::vector<std::uint8_t>& positive,
                           ClassificationMap* grad = nullptr);

EntropyMap entropy_map(const ClassificationMap& probs);

/// Mean of entropy_map over all slots.
double entropy_loss(const ClassificationMap& probs, ClassificationMap* grad = nullptr);

/// -sum log D_z over output cells, z taken from `map.domain`.
double discriminator_loss(const DomainMap& map, SpatialReduction reduction = SpatialReduction::sum,
                          DomainMap* grad = nullptr);

/// -sum log D_X for a target-domain sample. Throws ContractViolation when
/// `map.domain` is the source domain.
double adversarial_loss(const DomainMap& map, SpatialReduction reduction = SpatialReduction::sum,
                        DomainMap* grad = nullptr);

struct LossComponents {
  double loc = 0.0;
  double cls = 0.0;
  double ent_src = 0.0;
  double ent_tgt = 0.0;
  double adv = 0.0;
};

/// Weighted main-network total. Throws TrainingDivergence naming the first
/// non-finite component.
double main_objective(const LossComponents& c, const LossWeights& w);

double discriminator_objective(double dis_src, double dis_tgt);

}  // namespace pointda

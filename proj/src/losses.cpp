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

#include "pointda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pointda/error.hpp"

namespace pointda {
namespace {

// log(max(p, eps)) and its derivative; the clamp has zero slope below eps.
double safe_log(double p) { return std::log(std::max(p, kProbEpsilon)); }
double safe_log_grad(double p) { return p > kProbEpsilon ? 1.0 / p : 0.0; }

void check_grad_shape(const SlotTensor& in, const SlotTensor* grad) {
  if (grad != nullptr && !grad->same_shape(in)) {
    throw InvalidArgument("gradient buffer shape differs from input");
  }
}

void check_grad_shape(const DomainMap& in, const DomainMap* grad) {
  if (grad != nullptr && (grad->width != in.width || grad->height != in.height)) {
    throw InvalidArgument("gradient buffer shape differs from domain map");
  }
}

double reduction_scale(const DomainMap& map, SpatialReduction r) {
  return r == SpatialReduction::mean ? 1.0 / static_cast<double>(map.num_cells()) : 1.0;
}

}  // namespace

const char* to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

void LossWeights::validate() const {
  const std::pair<const char*, double> items[] = {
      {"lambda_loc", loc}, {"lambda_cls", cls}, {"lambda_ent", ent}, {"lambda_adv", adv}};
  for (const auto& [name, v] : items) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument(fmt::format("{} must be finite and >= 0, got {}", name, v));
    }
  }
}

LocationLoss location_loss(const OffsetMap& pred, const std::vector<LocationTarget>& targets,
                           const AnchorGrid& grid, LengthUnit unit, OffsetMap* grad) {
  if (!pred.matches(grid)) throw InvalidArgument("offset map does not match anchor grid");
  check_grad_shape(pred, grad);
  if (targets.empty()) return {0.0, true};

  // Decoded distance is stride * |delta_pred - delta_target|.
  const double scale = unit == LengthUnit::pixels ? static_cast<double>(grid.stride) : 1.0;
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  double total = 0.0;
  for (const auto& t : targets) {
    const double dx = pred.slot(t.slot, 0) - t.delta_i;
    const double dy = pred.slot(t.slot, 1) - t.delta_j;
    const double norm = std::hypot(dx, dy);
    total += scale * norm;
    if (grad != nullptr && norm > 0.0) {
      grad->slot(t.slot, 0) += inv_n * scale * dx / norm;
      grad->slot(t.slot, 1) += inv_n * scale * dy / norm;
    }
  }
  return {total * inv_n, false};
}

double classification_loss(const ClassificationMap& probs, const std::vector<std::uint8_t>& positive,
                           ClassificationMap* grad) {
  const std::size_t n = probs.num_slots();
  if (positive.size() != n || probs.components() != 2) {
    throw InvalidArgument(fmt::format("classification targets ({}) do not match {} slots",
                                      positive.size(), n));
  }
  check_grad_shape(probs, grad);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const int c = positive[s] ? 0 : 1;
    const double p = probs.slot(s, c);
    total -= safe_log(p);
    if (grad != nullptr) grad->slot(s, c) -= inv_n * safe_log_grad(p);
  }
  return total * inv_n;
}

EntropyMap entropy_map(const ClassificationMap& probs) {
  EntropyMap e(probs.width(), probs.height(), probs.depth(), 1);
  const double norm = 1.0 / std::numbers::ln2;
  for (std::size_t s = 0; s < probs.num_slots(); ++s) {
    const double p = probs.slot(s, 0);
    const double q = probs.slot(s, 1);
    const double h = -norm * (p * safe_log(p) + q * safe_log(q));
    e.slot(s, 0) = std::clamp(h, 0.0, 1.0);
  }
  return e;
}

double entropy_loss(const ClassificationMap& probs, ClassificationMap* grad) {
  check_grad_shape(probs, grad);
  const std::size_t n = probs.num_slots();
  const double norm = 1.0 / std::numbers::ln2;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (int c = 0; c < 2; ++c) {
      const double p = probs.slot(s, c);
      total -= norm * p * safe_log(p);
      if (grad != nullptr) {
        // d/dp [-p log(max(p, eps))] = -(log p + 1) above eps, -log eps below.
        const double d = p > kProbEpsilon ? -(std::log(p) + 1.0) : -safe_log(p);
        grad->slot(s, c) += inv_n * norm * d;
      }
    }
  }
  return total * inv_n;
}

double discriminator_loss(const DomainMap& map, SpatialReduction reduction, DomainMap* grad) {
  check_grad_shape(map, grad);
  const int z = static_cast<int>(map.domain);
  const double scale = reduction_scale(map, reduction);
  double total = 0.0;
  for (std::size_t cell = 0; cell < map.num_cells(); ++cell) {
    const double p = map.probs[cell * 2 + z];
    total -= safe_log(p);
    if (grad != nullptr) grad->probs[cell * 2 + z] -= scale * safe_log_grad(p);
  }
  return total * scale;
}

double adversarial_loss(const DomainMap& map, SpatialReduction reduction, DomainMap* grad) {
  if (map.domain != Domain::target) {
    throw ContractViolation("adversarial loss is defined only on target-domain samples");
  }
  check_grad_shape(map, grad);
  const double scale = reduction_scale(map, reduction);
  double total = 0.0;
  for (std::size_t cell = 0; cell < map.num_cells(); ++cell) {
    const double p = map.probs[cell * 2];
    total -= safe_log(p);
    if (grad != nullptr) grad->probs[cell * 2] -= scale * safe_log_grad(p);
  }
  return total * scale;
}

double main_objective(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> items[] = {
      {"L_loc", c.loc}, {"L_cls", c.cls}, {"L_ent_X", c.ent_src}, {"L_ent_Y", c.ent_tgt},
      {"L_adv", c.adv}};
  for (const auto& [name, v] : items) {
    if (!std::isfinite(v)) throw TrainingDivergence(fmt::format("{} is not finite ({})", name, v));
  }
  return w.loc * c.loc + w.cls * c.cls + w.ent * (c.ent_src + c.ent_tgt) + w.adv * c.adv;
}

double discriminator_objective(double dis_src, double dis_tgt) { return dis_src + dis_tgt; }

}  // namespace pointda

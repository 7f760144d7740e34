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

#include "pointda/geometry.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pointda/error.hpp"

namespace pointda {

void PointSet::validate() const {
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidArgument("point set contains a non-finite coordinate");
    }
  }
  if (!confidences.empty()) {
    if (confidences.size() != points.size()) {
      throw InvalidArgument(fmt::format("{} confidences for {} points", confidences.size(),
                                        points.size()));
    }
    for (double c : confidences) {
      if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("confidence outside [0, 1]");
    }
  }
}

AnchorGrid build_anchor_grid(int image_w, int image_h, int stride, int slots_per_cell) {
  if (image_w <= 0 || image_h <= 0 || stride <= 0 || slots_per_cell <= 0) {
    throw InvalidArgument(fmt::format(
        "anchor grid needs positive arguments, got image {}x{}, stride {}, slots {}", image_w,
        image_h, stride, slots_per_cell));
  }
  AnchorGrid g;
  g.image_w = image_w;
  g.image_h = image_h;
  g.stride = stride;
  g.slots_per_cell = slots_per_cell;
  g.feat_w = (image_w + stride - 1) / stride;
  g.feat_h = (image_h + stride - 1) / stride;
  return g;
}

Point decode_point(double delta_i, double delta_j, CellIndex cell, int stride) {
  return {stride * (cell.i + delta_i), stride * (cell.j + delta_j)};
}

SlotTensor decode_points(const OffsetMap& offsets, const AnchorGrid& grid) {
  if (!offsets.matches(grid) || offsets.components() != 2) {
    throw InvalidArgument(fmt::format(
        "offset map {}x{}x{}x{} does not match grid {}x{}x{}", offsets.width(), offsets.height(),
        offsets.depth(), offsets.components(), grid.feat_w, grid.feat_h, grid.slots_per_cell));
  }
  SlotTensor out(grid.feat_w, grid.feat_h, grid.slots_per_cell, 2);
  for (int j = 0; j < grid.feat_h; ++j) {
    for (int i = 0; i < grid.feat_w; ++i) {
      for (int k = 0; k < grid.slots_per_cell; ++k) {
        const Point p = decode_point(offsets.at(i, j, k, 0), offsets.at(i, j, k, 1), {i, j},
                                     grid.stride);
        out.at(i, j, k, 0) = p.x;
        out.at(i, j, k, 1) = p.y;
      }
    }
  }
  return out;
}

bool reachable(Point target, CellIndex cell, int stride) {
  return std::abs(target.x / stride - cell.i) <= 1.0 && std::abs(target.y / stride - cell.j) <= 1.0;
}

std::pair<double, double> encode_offsets(Point target, CellIndex cell, const AnchorGrid& grid) {
  if (!reachable(target, cell, grid.stride)) {
    throw OutOfRange(fmt::format("point ({}, {}) is not reachable from cell ({}, {}) at stride {}",
                                 target.x, target.y, cell.i, cell.j, grid.stride));
  }
  return {target.x / grid.stride - cell.i, target.y / grid.stride - cell.j};
}

}  // namespace pointda

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

// One-to-one assignment of proposal slots to ground-truth points.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pointda/geometry.hpp"

namespace pointda {

/// Row-major (num_proposals x num_gt) matrix of matching costs.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

struct MatchPair {
  std::size_t slot = 0;
  std::size_t gt = 0;
  bool operator==(const MatchPair&) const = default;
};

struct Matching {
  std::vector<MatchPair> pairs;  // sorted by gt index
  std::vector<std::size_t> unmatched_slots;
  double total_cost = 0.0;
};

/// cost[slot, n] = dist_weight * |p_slot - p_n| - cls_pos(slot).
/// `decoded` holds per-slot pixel coordinates, `cls` the (pos, neg) pairs.
/// Throws EmptyGroundTruth when gt is empty.
CostMatrix build_cost_matrix(const SlotTensor& decoded, const SlotTensor& cls, const PointSet& gt,
                             double dist_weight);

/// Minimum-cost injective assignment of every gt column to a distinct slot row
/// (Kuhn-Munkres with potentials, O(n^2 m)). Among equal-cost alternatives the
/// scan prefers the lowest slot index. Throws InfeasibleAssignment when there
/// are more gt points than slots.
Matching hungarian_assign(const CostMatrix& costs);

struct LocationTarget {
  std::size_t slot = 0;
  double delta_i = 0.0;
  double delta_j = 0.0;
};

struct MatchTargets {
  std::vector<LocationTarget> loc;    // one per matched slot
  std::vector<std::uint8_t> positive;  // per slot: 1 = pos, 0 = neg
  int clamped = 0;                    // matched points outside reach of their cell
};

/// Positive labels and offset targets for matched slots. A matched point that
/// cannot be reached from its slot's cell gets its targets clamped to [-1, 1]
/// and a warning is logged.
MatchTargets derive_targets(const Matching& match, const PointSet& gt, const AnchorGrid& grid);

/// Matching for one image, treating an empty gt as "everything negative".
Matching match_predictions(const SlotTensor& offsets, const SlotTensor& cls, const PointSet& gt,
                           const AnchorGrid& grid, double dist_weight);

}  // namespace pointda

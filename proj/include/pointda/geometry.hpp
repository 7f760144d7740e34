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

// Anchor lattice and offset <-> pixel coordinate mapping.
//
// Axis convention used everywhere in pointda: `i` indexes feature columns and
// maps to the image x axis, `j` indexes feature rows and maps to y. Images are
// stored row-major, so pixel (x, y) lives at offset y * width + x. A proposal
// slot (i, j, k) is flattened as (j * feat_w + i) * slots_per_cell + k.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace pointda {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Head/object coordinates in image pixels, with optional confidences.
struct PointSet {
  std::vector<Point> points;
  std::vector<double> confidences;  // empty, or one entry per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_confidences() const { return !confidences.empty(); }

  /// Throws InvalidArgument on non-finite coordinates or bad confidences.
  void validate() const;
};

struct CellIndex {
  int i = 0;  // column
  int j = 0;  // row
};

struct AnchorGrid {
  int feat_w = 0;
  int feat_h = 0;
  int slots_per_cell = 0;
  int stride = 0;
  int image_w = 0;
  int image_h = 0;

  std::size_t num_cells() const {
    return static_cast<std::size_t>(feat_w) * static_cast<std::size_t>(feat_h);
  }
  std::size_t num_slots() const { return num_cells() * static_cast<std::size_t>(slots_per_cell); }

  std::size_t slot_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(j) * feat_w + i) * slots_per_cell + k;
  }
  CellIndex cell_of(std::size_t slot) const {
    const auto cell = static_cast<int>(slot / slots_per_cell);
    return {cell % feat_w, cell / feat_w};
  }
  bool operator==(const AnchorGrid&) const = default;
};

AnchorGrid build_anchor_grid(int image_w, int image_h, int stride, int slots_per_cell);

/// Dense (W, H, D, C) double tensor addressed by slot. Stores offsets, class
/// probabilities and their gradients. Layout: ((j * W + i) * D + k) * C + c.
class SlotTensor {
 public:
  SlotTensor() = default;
  SlotTensor(int w, int h, int d, int c = 2, double fill = 0.0)
      : w_(w), h_(h), d_(d), c_(c),
        data_(static_cast<std::size_t>(w) * h * d * c, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }
  int depth() const { return d_; }
  int components() const { return c_; }
  std::size_t num_slots() const { return static_cast<std::size_t>(w_) * h_ * d_; }

  double& at(int i, int j, int k, int c) { return data_[index(i, j, k, c)]; }
  double at(int i, int j, int k, int c) const { return data_[index(i, j, k, c)]; }
  double& slot(std::size_t s, int c) { return data_[s * c_ + c]; }
  double slot(std::size_t s, int c) const { return data_[s * c_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const SlotTensor& o) const {
    return w_ == o.w_ && h_ == o.h_ && d_ == o.d_ && c_ == o.c_;
  }
  bool matches(const AnchorGrid& g) const {
    return w_ == g.feat_w && h_ == g.feat_h && d_ == g.slots_per_cell;
  }

 private:
  std::size_t index(int i, int j, int k, int c) const {
    return ((static_cast<std::size_t>(j) * w_ + i) * d_ + k) * c_ + c;
  }

  int w_ = 0, h_ = 0, d_ = 0, c_ = 0;
  std::vector<double> data_;
};

/// Per-slot (delta_i, delta_j), fractions of stride in [-1, 1].
using OffsetMap = SlotTensor;

/// x = s * (i + delta_i), y = s * (j + delta_j). Not clipped to the image.
SlotTensor decode_points(const OffsetMap& offsets, const AnchorGrid& grid);

Point decode_point(double delta_i, double delta_j, CellIndex cell, int stride);

/// Inverse of decode for one slot. Throws OutOfRange if the point is more than
/// one stride away from the cell anchor along either axis.
std::pair<double, double> encode_offsets(Point target, CellIndex cell, const AnchorGrid& grid);

/// True when |x/s - i| <= 1 and |y/s - j| <= 1.
bool reachable(Point target, CellIndex cell, int stride);

}  // namespace pointda

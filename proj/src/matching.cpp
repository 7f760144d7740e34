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

#include "pointda/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pointda/error.hpp"

namespace pointda {

namespace {
constexpr int kClampWarnings = 5;
}  // namespace

CostMatrix build_cost_matrix(const SlotTensor& decoded, const SlotTensor& cls, const PointSet& gt,
                             double dist_weight) {
  if (gt.empty()) throw EmptyGroundTruth("no ground-truth points to match");
  if (!decoded.same_shape(cls)) {
    throw InvalidArgument("decoded points and class map have different shapes");
  }
  const std::size_t n_slots = decoded.num_slots();
  CostMatrix costs(n_slots, gt.size());
  for (std::size_t s = 0; s < n_slots; ++s) {
    const double x = decoded.slot(s, 0);
    const double y = decoded.slot(s, 1);
    const double conf = cls.slot(s, 0);
    for (std::size_t n = 0; n < gt.size(); ++n) {
      const double dist = std::hypot(x - gt.points[n].x, y - gt.points[n].y);
      costs(s, n) = dist_weight * dist - conf;
    }
  }
  return costs;
}

Matching hungarian_assign(const CostMatrix& costs) {
  const std::size_t n = costs.cols();  // gt points, assigned one by one
  const std::size_t m = costs.rows();  // slots
  if (n > m) {
    throw InfeasibleAssignment(fmt::format(
        "{} ground-truth points but only {} proposal slots; raise slots_per_cell or lower stride",
        n, m));
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (!std::isfinite(costs(r, c))) throw InvalidArgument("cost matrix has non-finite entries");
    }
  }

  // 1-based potentials formulation: u over gt, v over slots, owner[j] = gt
  // currently holding slot j (0 = free).
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    owner[0] = row;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = costs(j - 1, i0 - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Matching result;
  result.pairs.reserve(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) {
      result.pairs.push_back({j - 1, owner[j] - 1});
    } else {
      result.unmatched_slots.push_back(j - 1);
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.gt < b.gt; });
  for (const auto& p : result.pairs) result.total_cost += costs(p.slot, p.gt);
  return result;
}

MatchTargets derive_targets(const Matching& match, const PointSet& gt, const AnchorGrid& grid) {
  MatchTargets t;
  t.positive.assign(grid.num_slots(), 0);
  t.loc.reserve(match.pairs.size());
  for (const auto& pair : match.pairs) {
    if (pair.slot >= grid.num_slots() || pair.gt >= gt.size()) {
      throw InvalidArgument("matching does not belong to this grid / ground truth");
    }
    const CellIndex cell = grid.cell_of(pair.slot);
    const Point p = gt.points[pair.gt];
    LocationTarget lt{pair.slot, p.x / grid.stride - cell.i, p.y / grid.stride - cell.j};
    if (!reachable(p, cell, grid.stride)) {
      ++t.clamped;
      // Early in training this can fire every step; warn a few times, then go quiet.
      static int warned = 0;
      const auto level = warned < kClampWarnings ? spdlog::level::warn : spdlog::level::debug;
      spdlog::log(level, "gt point ({:.2f}, {:.2f}) unreachable from cell ({}, {}); clamping target",
                  p.x, p.y, cell.i, cell.j);
      if (++warned == kClampWarnings) spdlog::warn("further clamping warnings are logged at debug level");
      lt.delta_i = std::clamp(lt.delta_i, -1.0, 1.0);
      lt.delta_j = std::clamp(lt.delta_j, -1.0, 1.0);
    }
    t.positive[pair.slot] = 1;
    t.loc.push_back(lt);
  }
  return t;
}

Matching match_predictions(const SlotTensor& offsets, const SlotTensor& cls, const PointSet& gt,
                           const AnchorGrid& grid, double dist_weight) {
  if (gt.empty()) {
    Matching none;
    none.unmatched_slots.resize(grid.num_slots());
    for (std::size_t s = 0; s < grid.num_slots(); ++s) none.unmatched_slots[s] = s;
    return none;
  }
  return hungarian_assign(build_cost_matrix(decode_points(offsets, grid), cls, gt, dist_weight));
}

}  // namespace pointda

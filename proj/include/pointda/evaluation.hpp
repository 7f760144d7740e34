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

// Counting metrics and qualitative artifacts.
//
// "mse" throughout is the crowd-counting convention: the ROOT of the mean
// squared count error, so mae <= mse always holds.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pointda/data.hpp"
#include "pointda/geometry.hpp"
#include "pointda/network.hpp"

namespace pointda {

struct ImageCount {
  std::string id;
  int gt_count = 0;
  int pred_count = 0;
  double confidence_mean = 0.0;  // mean cls_pos of predicted points, 0 if none
};

struct MetricsRecord {
  std::string dataset;
  std::string split;
  std::int64_t step = 0;
  std::size_t n_images = 0;
  double threshold = 0.5;
  double mae = 0.0;
  double mse = 0.0;  // root-mean-square count error
  double mean_entropy = 0.0;
  std::vector<ImageCount> rows;
};

/// Every slot with cls_pos >= threshold, decoded to pixels, with its
/// confidence. No suppression. Throws InvalidArgument unless 0 < threshold < 1.
PointSet extract_points(const PredictionMaps& maps, const AnchorGrid& grid, double threshold);

struct CountErrors {
  double mae = 0.0;
  double mse = 0.0;
};

/// Throws InvalidArgument on empty or unequal-length input.
CountErrors count_metrics(std::span<const int> pred, std::span<const int> gt);

/// Runs the model over a labeled split. Throws MissingLabels for unlabeled
/// splits. The model's parameters are not modified.
MetricsRecord evaluate(PointProposalNet& model, const Dataset& dataset, double threshold = 0.5);

/// One record per threshold from a single forward pass per image.
std::vector<MetricsRecord> evaluate_sweep(PointProposalNet& model, const Dataset& dataset,
                                          const std::vector<double>& thresholds);

/// Mean entropy_loss over any split, labeled or not.
double mean_entropy(PointProposalNet& model, const Dataset& dataset);

struct ArtifactPaths {
  std::filesystem::path overlay;
  std::filesystem::path entropy;
};

/// Writes <id>_overlay.png (predictions in red, gt in green when present) and
/// <id>_entropy.png (per-window max entropy, grayscale 0..255, upscaled by s).
ArtifactPaths render_artifacts(PointProposalNet& model, const Sample& sample,
                               const std::filesystem::path& out_dir, double threshold = 0.5);

/// 8-bit entropy heatmap of size (W * s, H * s): value = round(255 * max_k E).
std::vector<std::uint8_t> entropy_heatmap(const PredictionMaps& maps, int stride, int* out_w,
                                          int* out_h);

inline constexpr const char* kMetricsCsvHeader = "dataset,split,step,n_images,mae,mse,mean_entropy";
inline constexpr const char* kPerImageCsvHeader = "id,gt_count,pred_count,confidence_mean";

std::string metrics_csv_row(const MetricsRecord& r);
void write_per_image_csv(const std::filesystem::path& path, const MetricsRecord& r);

}  // namespace pointda

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

#include "pointda/evaluation.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pointda/error.hpp"
#include "pointda/losses.hpp"

namespace fs = std::filesystem;

namespace pointda {
namespace {

PredictionMaps predict_one(PointProposalNet& model, const Image& image) {
  const Tensor batch = to_batch({&image});
  return std::move(model.forward(batch).front());
}

cv::Mat to_bgr(const Image& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[x][2 - c] = static_cast<std::uint8_t>(
            std::lround(std::clamp(image.at(x, y, c), 0.0f, 1.0f) * 255.0f));
      }
    }
  }
  return bgr;
}

void imwrite_or_throw(const fs::path& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError(fmt::format("cannot write {}: {}", path.string(), e.what()));
  }
  if (!ok) throw IoError(fmt::format("cannot write {}", path.string()));
}

}  // namespace

PointSet extract_points(const PredictionMaps& maps, const AnchorGrid& grid, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument(fmt::format("threshold must be in (0, 1), got {}", threshold));
  }
  if (!maps.offsets.matches(grid) || !maps.cls.matches(grid)) {
    throw InvalidArgument("prediction maps do not match the anchor grid");
  }
  PointSet out;
  for (std::size_t s = 0; s < grid.num_slots(); ++s) {
    const double conf = maps.cls.slot(s, 0);
    if (conf < threshold) continue;
    out.points.push_back(
        decode_point(maps.offsets.slot(s, 0), maps.offsets.slot(s, 1), grid.cell_of(s), grid.stride));
    out.confidences.push_back(conf);
  }
  return out;
}

CountErrors count_metrics(std::span<const int> pred, std::span<const int> gt) {
  if (pred.empty() || pred.size() != gt.size()) {
    throw InvalidArgument(fmt::format("count_metrics needs equal non-empty lists, got {} and {}",
                                      pred.size(), gt.size()));
  }
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - gt[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(pred.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

std::vector<MetricsRecord> evaluate_sweep(PointProposalNet& model, const Dataset& dataset,
                                          const std::vector<double>& thresholds) {
  if (!dataset.labeled()) {
    throw MissingLabels(fmt::format("{}/{} split has no labels to evaluate against",
                                    to_string(dataset.domain()), to_string(dataset.split())));
  }
  if (dataset.size() == 0) throw InvalidArgument("cannot evaluate an empty dataset");
  std::vector<MetricsRecord> records(thresholds.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    records[t].dataset = to_string(dataset.domain());
    records[t].split = to_string(dataset.split());
    records[t].n_images = dataset.size();
    records[t].threshold = thresholds[t];
  }
  double entropy_sum = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Sample& s = dataset.get(i);
    const PredictionMaps maps = predict_one(model, s.image);
    const AnchorGrid grid = model.grid_for(s.image.width, s.image.height);
    entropy_sum += entropy_loss(maps.cls);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const PointSet pred = extract_points(maps, grid, thresholds[t]);
      double conf = 0.0;
      for (double c : pred.confidences) conf += c;
      ImageCount row{s.id, static_cast<int>(s.points->size()), static_cast<int>(pred.size()),
                     pred.empty() ? 0.0 : conf / static_cast<double>(pred.size())};
      records[t].rows.push_back(std::move(row));
    }
  }
  for (auto& r : records) {
    std::vector<int> pred, gt;
    for (const auto& row : r.rows) {
      pred.push_back(row.pred_count);
      gt.push_back(row.gt_count);
    }
    const CountErrors e = count_metrics(pred, gt);
    r.mae = e.mae;
    r.mse = e.mse;
    r.mean_entropy = entropy_sum / static_cast<double>(dataset.size());
  }
  return records;
}

MetricsRecord evaluate(PointProposalNet& model, const Dataset& dataset, double threshold) {
  return std::move(evaluate_sweep(model, dataset, {threshold}).front());
}

double mean_entropy(PointProposalNet& model, const Dataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    sum += entropy_loss(predict_one(model, dataset.get(i).image).cls);
  }
  return sum / static_cast<double>(dataset.size());
}

std::vector<std::uint8_t> entropy_heatmap(const PredictionMaps& maps, int stride, int* out_w,
                                          int* out_h) {
  const EntropyMap e = entropy_map(maps.cls);
  const int w = e.width() * stride, h = e.height() * stride;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h);
  for (int j = 0; j < e.height(); ++j) {
    for (int i = 0; i < e.width(); ++i) {
      double worst = 0.0;
      for (int k = 0; k < e.depth(); ++k) worst = std::max(worst, e.at(i, j, k, 0));
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(worst, 0.0, 1.0)));
      for (int y = j * stride; y < (j + 1) * stride; ++y) {
        std::fill_n(pixels.begin() + static_cast<std::ptrdiff_t>(y) * w + i * stride, stride, v);
      }
    }
  }
  *out_w = w;
  *out_h = h;
  return pixels;
}

ArtifactPaths render_artifacts(PointProposalNet& model, const Sample& sample, const fs::path& out_dir,
                               double threshold) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  const PredictionMaps maps = predict_one(model, sample.image);
  const AnchorGrid grid = model.grid_for(sample.image.width, sample.image.height);
  const PointSet pred = extract_points(maps, grid, threshold);

  cv::Mat overlay = to_bgr(sample.image);
  if (sample.points) {
    for (const auto& p : sample.points->points) {
      cv::drawMarker(overlay, {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))},
                     {0, 255, 0}, cv::MARKER_CROSS, 5, 1);
    }
  }
  for (const auto& p : pred.points) {
    cv::circle(overlay, {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))}, 2,
               {0, 0, 255}, cv::FILLED);
  }

  int w = 0, h = 0;
  std::vector<std::uint8_t> heat = entropy_heatmap(maps, grid.stride, &w, &h);
  const cv::Mat heat_mat(h, w, CV_8UC1, heat.data());

  ArtifactPaths paths{out_dir / (sample.id + "_overlay.png"), out_dir / (sample.id + "_entropy.png")};
  imwrite_or_throw(paths.overlay, overlay);
  imwrite_or_throw(paths.entropy, heat_mat);
  return paths;
}

std::string metrics_csv_row(const MetricsRecord& r) {
  return fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f}", r.dataset, r.split, r.step, r.n_images,
                     r.mae, r.mse, r.mean_entropy);
}

void write_per_image_csv(const fs::path& path, const MetricsRecord& r) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << kPerImageCsvHeader << '\n';
  for (const auto& row : r.rows) {
    out << fmt::format("{},{},{},{:.6f}\n", row.id, row.gt_count, row.pred_count,
                       row.confidence_mean);
  }
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

}  // namespace pointda

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

// Synthetic dot-crowd scenes, the on-disk dataset layout and augmentation.
//
// Layout under a dataset root:
//   manifest.json
//   source/images/<id>.png   source/annotations/<id>.json
//   target/images/<id>.png   target/eval_labels/<id>.json
// Annotation files hold {"points": [[x, y], ...]} in pixels, origin top-left.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "pointda/geometry.hpp"
#include "pointda/image.hpp"
#include "pointda/losses.hpp"

namespace pointda {

enum class Background { flat, gradient, noise_texture };
enum class BlobProfile { gaussian, ring };

Background parse_background(const std::string& s);
BlobProfile parse_blob_profile(const std::string& s);
const char* to_string(Background b);
const char* to_string(BlobProfile p);

struct SceneParams {
  int image_size = 128;
  int count_min = 5;
  int count_max = 15;
  double radius_min = 2.0;
  double radius_max = 3.0;
  Background background = Background::flat;
  double illumination = 1.0;
  BlobProfile blob_profile = BlobProfile::gaussian;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument listing the first violated invariant.
  void validate() const;
  bool operator==(const SceneParams&) const = default;
};

struct DomainPairSpec {
  SceneParams source;
  SceneParams target;

  /// Names of the scene parameters (other than the seed) that differ.
  std::vector<std::string> shift_axes() const;
  /// Throws InvalidArgument when the two domains are identical.
  void validate() const;
};

/// Default source/target shift: flat background, radius 2-3, gain 1 versus
/// noise texture, radius 4-6, gain 0.6.
DomainPairSpec default_domain_pair(int image_size = 128);

struct Sample {
  std::string id;
  Image image;
  std::optional<PointSet> points;
  Domain domain = Domain::source;
};

struct RenderedScene {
  Sample sample;
  std::vector<double> radii;  // one per point
  Image blob_layer;           // blobs only, before background and gain
};

/// Renders one scene. Centers are uniform over the image with at least 2 px
/// between centers. Throws PlacementFailure when the count cannot be placed.
RenderedScene generate_scene(const SceneParams& params, std::mt19937_64& rng);

struct GeneratedCounts {
  std::size_t source_images = 0;
  std::size_t target_images = 0;
};

/// Writes the dataset layout above. Scene k of a domain is rendered with its
/// own generator seeded from (domain seed, k). Also writes
/// <domain>/generator_log.csv with id,count,mean_radius.
GeneratedCounts generate_domain_pair(const DomainPairSpec& spec, std::size_t n_source,
                                     std::size_t n_target, const std::filesystem::path& out_dir);

enum class Split { train, adapt, eval };
Split parse_split(const std::string& s);
const char* to_string(Split s);

/// Lazily loaded view of one domain split. Images are decoded on first access
/// and cached; annotations are parsed up front. Points are only exposed for
/// labeled splits: source train/eval and target eval. Not thread-safe.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::filesystem::path root, Domain domain, Split split);

  std::size_t size() const { return ids_.size(); }
  bool labeled() const { return labeled_; }
  Domain domain() const { return domain_; }
  Split split() const { return split_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::filesystem::path& root() const { return root_; }

  /// Throws DatasetIntegrity when an annotation lies outside the image.
  const Sample& get(std::size_t i) const;

 private:
  std::filesystem::path root_;
  Domain domain_ = Domain::source;
  Split split_ = Split::train;
  bool labeled_ = false;
  std::vector<std::string> ids_;
  std::vector<std::filesystem::path> image_paths_;
  std::vector<PointSet> labels_;
  std::shared_ptr<std::vector<std::optional<Sample>>> cache_;
};

Dataset load_dataset(const std::filesystem::path& root, Domain domain, Split split);

/// Parses an annotation file. Throws ParseError with the line number on
/// malformed JSON and DatasetIntegrity on negative/non-finite coordinates.
PointSet read_annotation(const std::filesystem::path& path);
void write_annotation(const std::filesystem::path& path, const PointSet& points);

struct AugmentConfig {
  int crop_w = 128;
  int crop_h = 128;
  double flip_prob = 0.5;
};

/// Random crop to (crop_w, crop_h) then horizontal flip with x' = (w - 1) - x.
/// A point survives the crop iff x0 <= x < x0 + crop_w (same for y). Throws
/// InvalidArgument when the crop exceeds the image.
Sample augment(const Sample& sample, const AugmentConfig& config, std::mt19937_64& rng);

nlohmann::json to_json(const SceneParams& p);

}  // namespace pointda

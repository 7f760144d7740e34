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

#include "pointda/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "pointda/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace pointda {
namespace {

constexpr double kMinSeparation = 2.0;
constexpr int kPlacementAttemptsPerPoint = 2000;
constexpr float kFlatLevel = 0.25f;
constexpr float kNoiseMean = 0.3f;
constexpr float kNoiseStd = 0.12f;
constexpr double kNoiseBlurSigma = 2.0;
constexpr float kBlobAmplitude = 0.7f;
constexpr float kBlobTint[3] = {1.0f, 0.95f, 0.85f};

Image render_background(const SceneParams& p, std::mt19937_64& rng) {
  const int n = p.image_size;
  Image bg(n, n);
  switch (p.background) {
    case Background::flat:
      std::fill(bg.data.begin(), bg.data.end(), kFlatLevel);
      break;
    case Background::gradient:
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            bg.at(x, y, c) = 0.1f + 0.3f * static_cast<float>(x) / std::max(1, n - 1);
          }
        }
      }
      break;
    case Background::noise_texture: {
      std::normal_distribution<float> normal(0.0f, 1.0f);
      cv::Mat noise(n, n, CV_32F);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) noise.at<float>(y, x) = normal(rng);
      }
      cv::Mat smooth;
      cv::GaussianBlur(noise, smooth, cv::Size(0, 0), kNoiseBlurSigma, kNoiseBlurSigma,
                       cv::BORDER_REFLECT);
      cv::Scalar mean, stddev;
      cv::meanStdDev(smooth, mean, stddev);
      const double scale = stddev[0] > 0.0 ? kNoiseStd / stddev[0] : 0.0;
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            bg.at(x, y, c) =
                kNoiseMean + static_cast<float>((smooth.at<float>(y, x) - mean[0]) * scale);
          }
        }
      }
      break;
    }
  }
  return bg;
}

float blob_value(BlobProfile profile, double dist, double radius) {
  if (profile == BlobProfile::gaussian) {
    const double sigma = radius / 2.0;
    return static_cast<float>(std::exp(-dist * dist / (2.0 * sigma * sigma)));
  }
  const double ring = 0.6 * radius, width = 0.25 * radius;
  const double d = dist - ring;
  return static_cast<float>(std::exp(-d * d / (2.0 * width * width)));
}

std::vector<Point> place_centers(const SceneParams& p, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(0.0, static_cast<double>(p.image_size - 1));
  std::vector<Point> centers;
  centers.reserve(count);
  const long budget = static_cast<long>(kPlacementAttemptsPerPoint) * std::max(count, 1);
  long attempts = 0;
  while (static_cast<int>(centers.size()) < count) {
    if (++attempts > budget) {
      throw PlacementFailure(fmt::format(
          "placed only {} of {} centers in a {}px image with {}px separation; lower the density",
          centers.size(), count, p.image_size, kMinSeparation));
    }
    const Point c{coord(rng), coord(rng)};
    const bool clear = std::all_of(centers.begin(), centers.end(), [&](const Point& o) {
      return std::hypot(o.x - c.x, o.y - c.y) >= kMinSeparation;
    });
    if (clear) centers.push_back(c);
  }
  return centers;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

std::uint64_t scene_seed(std::uint64_t base, Domain d, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(index)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::size_t line_of_offset(const std::string& text, std::size_t byte) {
  const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size()));
  return 1 + static_cast<std::size_t>(std::count(text.begin(), end, '\n'));
}

}  // namespace

Background parse_background(const std::string& s) {
  if (s == "flat") return Background::flat;
  if (s == "gradient") return Background::gradient;
  if (s == "noise-texture" || s == "noise_texture") return Background::noise_texture;
  throw InvalidArgument(fmt::format("unknown background '{}' (flat, gradient, noise-texture)", s));
}

BlobProfile parse_blob_profile(const std::string& s) {
  if (s == "gaussian") return BlobProfile::gaussian;
  if (s == "ring") return BlobProfile::ring;
  throw InvalidArgument(fmt::format("unknown blob profile '{}' (gaussian, ring)", s));
}

const char* to_string(Background b) {
  switch (b) {
    case Background::flat: return "flat";
    case Background::gradient: return "gradient";
    case Background::noise_texture: return "noise-texture";
  }
  return "?";
}

const char* to_string(BlobProfile p) { return p == BlobProfile::gaussian ? "gaussian" : "ring"; }

void SceneParams::validate() const {
  if (image_size < 1) throw InvalidArgument("scene image_size must be positive");
  if (count_min < 0 || count_min > count_max) {
    throw InvalidArgument(fmt::format("scene count range ({}, {}) is invalid", count_min, count_max));
  }
  if (!(radius_min >= 1.0) || radius_min > radius_max) {
    throw InvalidArgument(
        fmt::format("scene radius range ({}, {}) needs 1 <= min <= max", radius_min, radius_max));
  }
  if (!(illumination > 0.0)) throw InvalidArgument("scene illumination gain must be > 0");
}

json to_json(const SceneParams& p) {
  return {{"image_size", p.image_size},
          {"count_range", {p.count_min, p.count_max}},
          {"dot_radius_range", {p.radius_min, p.radius_max}},
          {"background", to_string(p.background)},
          {"illumination", p.illumination},
          {"blob_profile", to_string(p.blob_profile)},
          {"seed", p.seed}};
}

std::vector<std::string> DomainPairSpec::shift_axes() const {
  std::vector<std::string> axes;
  if (source.image_size != target.image_size) axes.emplace_back("image_size");
  if (source.count_min != target.count_min || source.count_max != target.count_max) {
    axes.emplace_back("count_range");
  }
  if (source.radius_min != target.radius_min || source.radius_max != target.radius_max) {
    axes.emplace_back("dot_radius_range");
  }
  if (source.background != target.background) axes.emplace_back("background");
  if (source.illumination != target.illumination) axes.emplace_back("illumination");
  if (source.blob_profile != target.blob_profile) axes.emplace_back("blob_profile");
  return axes;
}

void DomainPairSpec::validate() const {
  source.validate();
  target.validate();
  if (shift_axes().empty()) {
    throw InvalidArgument("source and target scene parameters are identical: no domain shift");
  }
}

DomainPairSpec default_domain_pair(int image_size) {
  DomainPairSpec spec;
  spec.source.image_size = image_size;
  spec.source.radius_min = 2.0;
  spec.source.radius_max = 3.0;
  spec.source.background = Background::flat;
  spec.source.illumination = 1.0;
  spec.source.seed = 1;
  spec.target = spec.source;
  spec.target.radius_min = 4.0;
  spec.target.radius_max = 6.0;
  spec.target.background = Background::noise_texture;
  spec.target.illumination = 0.6;
  spec.target.seed = 2;
  return spec;
}

RenderedScene generate_scene(const SceneParams& params, std::mt19937_64& rng) {
  params.validate();
  std::uniform_int_distribution<int> count_dist(params.count_min, params.count_max);
  const int count = count_dist(rng);
  const std::vector<Point> centers = place_centers(params, count, rng);
  std::uniform_real_distribution<double> radius_dist(params.radius_min, params.radius_max);
  std::vector<double> radii(centers.size());
  for (double& r : radii) r = params.radius_min == params.radius_max ? params.radius_min
                                                                      : radius_dist(rng);

  const int n = params.image_size;
  Image blobs(n, n);
  for (std::size_t b = 0; b < centers.size(); ++b) {
    const double r = radii[b];
    const int reach = static_cast<int>(std::ceil(2.0 * r)) + 1;
    const int x0 = std::max(0, static_cast<int>(std::floor(centers[b].x)) - reach);
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(centers[b].x)) + reach);
    const int y0 = std::max(0, static_cast<int>(std::floor(centers[b].y)) - reach);
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(centers[b].y)) + reach);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const float v = kBlobAmplitude *
                        blob_value(params.blob_profile,
                                   std::hypot(x - centers[b].x, y - centers[b].y), r);
        for (int c = 0; c < 3; ++c) {
          blobs.at(x, y, c) = std::max(blobs.at(x, y, c), v * kBlobTint[c]);
        }
      }
    }
  }

  const Image bg = render_background(params, rng);
  RenderedScene scene;
  scene.sample.image = Image(n, n);
  const auto gain = static_cast<float>(params.illumination);
  for (std::size_t i = 0; i < bg.data.size(); ++i) {
    scene.sample.image.data[i] = std::clamp(gain * (bg.data[i] + blobs.data[i]), 0.0f, 1.0f);
  }
  scene.sample.points = PointSet{centers, {}};
  scene.radii = std::move(radii);
  scene.blob_layer = std::move(blobs);
  return scene;
}

GeneratedCounts generate_domain_pair(const DomainPairSpec& spec, std::size_t n_source,
                                     std::size_t n_target, const fs::path& out_dir) {
  spec.validate();
  GeneratedCounts counts;
  const auto write_domain = [&](Domain domain, const SceneParams& params, std::size_t n) {
    const bool is_src = domain == Domain::source;
    const fs::path dir = out_dir / to_string(domain);
    const fs::path labels_dir = dir / (is_src ? "annotations" : "eval_labels");
    ensure_dir(dir / "images");
    ensure_dir(labels_dir);
    std::ostringstream log;
    log << "id,count,mean_radius\n";
    for (std::size_t k = 0; k < n; ++k) {
      std::mt19937_64 rng(scene_seed(params.seed, domain, k));
      RenderedScene scene = generate_scene(params, rng);
      const std::string id = fmt::format("{}_{:04d}", is_src ? "src" : "tgt", k);
      write_png(dir / "images" / (id + ".png"), scene.sample.image);
      write_annotation(labels_dir / (id + ".json"), *scene.sample.points);
      const double mean_r =
          scene.radii.empty()
              ? 0.0
              : std::accumulate(scene.radii.begin(), scene.radii.end(), 0.0) / scene.radii.size();
      log << fmt::format("{},{},{:.6f}\n", id, scene.radii.size(), mean_r);
    }
    write_text(dir / "generator_log.csv", log.str());
  };
  write_domain(Domain::source, spec.source, n_source);
  write_domain(Domain::target, spec.target, n_target);
  counts.source_images = n_source;
  counts.target_images = n_target;

  json shift = spec.shift_axes();
  const json manifest = {{"format_version", "1"},
                         {"spec", {{"source", to_json(spec.source)}, {"target", to_json(spec.target)}}},
                         {"shift_axes", shift},
                         {"counts", {{"source", n_source}, {"target", n_target}}}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return counts;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "adapt") return Split::adapt;
  if (s == "eval") return Split::eval;
  throw InvalidArgument(fmt::format("unknown split '{}' (train, adapt, eval)", s));
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::adapt: return "adapt";
    case Split::eval: return "eval";
  }
  return "?";
}

PointSet read_annotation(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open annotation {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}:{}: malformed annotation JSON ({})", path.string(),
                                 line_of_offset(text, e.byte), e.what()));
  }
  if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
    throw ParseError(fmt::format("{}:1: expected an object with a \"points\" array", path.string()));
  }
  PointSet ps;
  for (const auto& p : doc["points"]) {
    if (!p.is_array() || p.size() < 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ParseError(fmt::format("{}: every point must be [x, y]", path.string()));
    }
    const Point pt{p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || pt.x < 0.0 || pt.y < 0.0) {
      throw DatasetIntegrity(fmt::format("{}: point ({}, {}) lies outside the image",
                                         path.string(), pt.x, pt.y));
    }
    ps.points.push_back(pt);
  }
  return ps;
}

void write_annotation(const fs::path& path, const PointSet& points) {
  json pts = json::array();
  for (const auto& p : points.points) pts.push_back({p.x, p.y});
  write_text(path, json{{"points", pts}}.dump() + "\n");
}

Dataset::Dataset(fs::path root, Domain domain, Split split)
    : root_(std::move(root)), domain_(domain), split_(split) {
  const bool is_src = domain == Domain::source;
  if (is_src && split == Split::adapt) {
    throw InvalidArgument("the adapt split exists only for the target domain");
  }
  if (!is_src && split == Split::train) {
    throw InvalidArgument("the target domain has no labeled train split; use adapt");
  }
  labeled_ = split != Split::adapt;
  const fs::path dir = root_ / to_string(domain);
  const fs::path images = dir / "images";
  if (!fs::is_directory(images)) {
    throw DatasetIntegrity(fmt::format("missing image directory {}", images.string()));
  }
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      image_paths_.push_back(entry.path());
    }
  }
  std::sort(image_paths_.begin(), image_paths_.end());
  for (const auto& p : image_paths_) ids_.push_back(p.stem().string());

  if (labeled_) {
    const fs::path labels = dir / (is_src ? "annotations" : "eval_labels");
    std::vector<std::string> missing;
    for (const auto& id : ids_) {
      const fs::path file = labels / (id + ".json");
      if (!fs::is_regular_file(file)) {
        missing.push_back(file.string());
        continue;
      }
      labels_.push_back(read_annotation(file));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += "\n  " + m;
      throw DatasetIntegrity(
          fmt::format("{} image(s) without annotations:{}", missing.size(), list));
    }
  }
  cache_ = std::make_shared<std::vector<std::optional<Sample>>>(ids_.size());
}

const Sample& Dataset::get(std::size_t i) const {
  if (i >= ids_.size()) throw OutOfRange(fmt::format("sample {} of {}", i, ids_.size()));
  auto& slot = (*cache_)[i];
  if (!slot) {
    Sample s;
    s.id = ids_[i];
    s.domain = domain_;
    s.image = read_png(image_paths_[i]);
    if (labeled_) {
      for (const auto& p : labels_[i].points) {
        if (p.x >= s.image.width || p.y >= s.image.height) {
          throw DatasetIntegrity(fmt::format("{}: point ({}, {}) lies outside the {}x{} image",
                                             s.id, p.x, p.y, s.image.width, s.image.height));
        }
      }
      s.points = labels_[i];
    }
    slot = std::move(s);
  }
  return *slot;
}

Dataset load_dataset(const fs::path& root, Domain domain, Split split) {
  return Dataset(root, domain, split);
}

Sample augment(const Sample& sample, const AugmentConfig& config, std::mt19937_64& rng) {
  const Image& img = sample.image;
  if (config.crop_w <= 0 || config.crop_h <= 0 || config.crop_w > img.width ||
      config.crop_h > img.height) {
    throw InvalidArgument(fmt::format("crop {}x{} does not fit a {}x{} image", config.crop_w,
                                      config.crop_h, img.width, img.height));
  }
  std::uniform_int_distribution<int> dx(0, img.width - config.crop_w);
  std::uniform_int_distribution<int> dy(0, img.height - config.crop_h);
  const int x0 = dx(rng);
  const int y0 = dy(rng);
  std::bernoulli_distribution flip(config.flip_prob);
  const bool do_flip = flip(rng);

  Sample out;
  out.id = sample.id;
  out.domain = sample.domain;
  out.image = crop(img, x0, y0, config.crop_w, config.crop_h);
  if (do_flip) out.image = flip_horizontal(out.image);
  if (sample.points) {
    PointSet kept;
    for (std::size_t n = 0; n < sample.points->size(); ++n) {
      const Point p = sample.points->points[n];
      if (p.x < x0 || p.x >= x0 + config.crop_w || p.y < y0 || p.y >= y0 + config.crop_h) continue;
      Point q{p.x - x0, p.y - y0};
      if (do_flip) q.x = (config.crop_w - 1) - q.x;
      kept.points.push_back(q);
      if (sample.points->has_confidences()) kept.confidences.push_back(sample.points->confidences[n]);
    }
    out.points = std::move(kept);
  }
  return out;
}

}  // namespace pointda

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

#pragma once

#include <filesystem>
#include <vector>

#include "pointda/tensor.hpp"

namespace pointda {

/// Planar RGB float image in [0, 1]; pixel (x, y) of channel c is at
/// (c * height + y) * width + x.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

/// Writes an 8-bit RGB PNG. Throws IoError with the path on failure.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Rounds to the 8-bit grid the PNG codec stores.
Image quantize_8bit(const Image& image);

Image crop(const Image& image, int x0, int y0, int w, int h);
Image flip_horizontal(const Image& image);

/// Stacks same-sized images into an (N, 3, H, W) tensor.
Tensor to_batch(const std::vector<const Image*>& images);

}  // namespace pointda

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

// Converters from external point-annotation formats into the JSON layout the
// datasets use. New formats plug in through register_annotation_format().

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pointda/geometry.hpp"

namespace pointda {

struct AnnotationFormat {
  std::string name;
  std::string extension;  // matched case-insensitively when converting a directory
  std::string description;
  std::function<PointSet(const std::filesystem::path&)> read;
};

/// Adds or replaces a format. Built-ins: "csv" and "txt".
void register_annotation_format(AnnotationFormat format);

/// Throws InvalidArgument naming the known formats when `name` is unknown.
const AnnotationFormat& annotation_format(const std::string& name);
std::vector<std::string> annotation_format_names();

/// "x,y" per line; a non-numeric first line is taken as a header.
PointSet read_csv_points(const std::filesystem::path& path);
/// Whitespace-separated "x y" per line; '#' starts a comment.
PointSet read_txt_points(const std::filesystem::path& path);

/// Converts one file, or every file with the format's extension in a
/// directory, into <out_dir>/<stem>.json. Returns the number written.
std::size_t convert_annotations(const std::string& format, const std::filesystem::path& input,
                                const std::filesystem::path& out_dir);

}  // namespace pointda

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

#include "pointda/convert.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pointda/data.hpp"
#include "pointda/error.hpp"

namespace fs = std::filesystem;

namespace pointda {
namespace {

std::map<std::string, AnnotationFormat>& registry() {
  static std::map<std::string, AnnotationFormat> formats = [] {
    std::map<std::string, AnnotationFormat> m;
    m["csv"] = {"csv", ".csv", "x,y per line, optional header", read_csv_points};
    m["txt"] = {"txt", ".txt", "whitespace-separated x y per line, # comments", read_txt_points};
    return m;
  }();
  return formats;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return in;
}

void push_point(PointSet& set, double x, double y, const fs::path& path, std::size_t line) {
  if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || y < 0.0) {
    throw DatasetIntegrity(
        fmt::format("{}:{}: coordinates must be finite and non-negative", path.string(), line));
  }
  set.points.push_back({x, y});
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

PointSet read_csv_points(const fs::path& path) {
  std::ifstream in = open_input(path);
  PointSet out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    double x = 0, y = 0;
    const bool ok = comma != std::string::npos && parse_double(line.substr(0, comma), x) &&
                    parse_double(line.substr(comma + 1), y);
    if (!ok) {
      if (n == 1) continue;  // header
      throw ParseError(fmt::format("{}:{}: expected 'x,y', got '{}'", path.string(), n, trim(line)));
    }
    push_point(out, x, y, path, n);
  }
  return out;
}

PointSet read_txt_points(const fs::path& path) {
  std::ifstream in = open_input(path);
  PointSet out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a)) continue;
    double x = 0, y = 0;
    if (!(fields >> b) || (fields >> extra) || !parse_double(a, x) || !parse_double(b, y)) {
      throw ParseError(fmt::format("{}:{}: expected 'x y', got '{}'", path.string(), n, trim(line)));
    }
    push_point(out, x, y, path, n);
  }
  return out;
}

void register_annotation_format(AnnotationFormat format) {
  if (format.name.empty() || !format.read) {
    throw InvalidArgument("an annotation format needs a name and a reader");
  }
  registry()[format.name] = std::move(format);
}

const AnnotationFormat& annotation_format(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    throw InvalidArgument(fmt::format("unknown annotation format '{}' (known: {})", name,
                                      fmt::join(annotation_format_names(), ", ")));
  }
  return it->second;
}

std::vector<std::string> annotation_format_names() {
  std::vector<std::string> names;
  for (const auto& [name, f] : registry()) names.push_back(name);
  return names;
}

std::size_t convert_annotations(const std::string& format, const fs::path& input,
                                const fs::path& out_dir) {
  const AnnotationFormat& f = annotation_format(format);
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      if (entry.is_regular_file() && lower(entry.path().extension().string()) == lower(f.extension)) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    throw IoError(fmt::format("input {} does not exist", input.string()));
  }
  fs::create_directories(out_dir);
  for (const fs::path& file : files) {
    write_annotation(out_dir / (file.stem().string() + ".json"), f.read(file));
  }
  return files.size();
}

}  // namespace pointda

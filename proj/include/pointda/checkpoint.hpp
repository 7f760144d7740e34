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

// Versioned binary checkpoint container. Layout is documented in
// docs/checkpoint_format.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pointda/training.hpp"

namespace pointda {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  double best_metric = -1.0;
  std::int64_t best_step = -1;
  std::string config_yaml;
};

void save_checkpoint(const std::filesystem::path& path, TrainState& state,
                     const std::string& config_yaml);

/// Reads only the header (including the embedded config).
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Restores parameters, optimizer moments and counters into a state built
/// from the same model config. Throws ParseError on a corrupt or mismatched
/// file.
CheckpointHeader load_checkpoint(const std::filesystem::path& path, TrainState& state);

}  // namespace pointda

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

// Run configuration: a YAML document with one section per module. Every key
// has a default (see default_config_yaml()); unknown keys are rejected.
// Precedence, lowest first: defaults, config file, POINTDA_SEED, dotted
// command-line overrides such as `train.steps=500` or `seed=7`.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pointda/data.hpp"
#include "pointda/losses.hpp"
#include "pointda/network.hpp"

namespace pointda {

struct EnabledLosses {
  bool ent_src = true;
  bool ent_tgt = true;
  bool adv = true;

  bool operator==(const EnabledLosses&) const = default;
};

/// Parses names from {ent_src, ent_tgt, adv}.
EnabledLosses parse_enabled_losses(const std::vector<std::string>& names);
std::vector<std::string> enabled_loss_names(const EnabledLosses& e);

struct ModelConfig {
  BackboneConfig backbone;
  DiscriminatorConfig discriminator;
};

struct TrainConfig {
  LossWeights weights;
  EnabledLosses enabled;
  std::int64_t steps = 2000;
  int batch_source = 4;
  int batch_target = 4;
  double lr_main = 1e-4;
  double lr_disc = 1e-4;
  std::uint64_t seed = 0;
  std::int64_t eval_interval = 500;
  double match_dist_weight = 0.05;  // tau, per pixel
  bool normalize_dis_loss = true;
  AugmentConfig augment;
  double eval_threshold = 0.5;

  /// Throws ConfigError listing every invalid field.
  void validate() const;
};

struct DataConfig {
  std::string root = "data";
  std::size_t n_source = 100;
  std::size_t n_target = 100;
  DomainPairSpec pair = default_domain_pair();
};

struct EvalConfig {
  double threshold = 0.5;
  std::vector<double> thresholds{0.3, 0.4, 0.5, 0.6, 0.7};
  int visualize_count = 4;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::string log_level = "info";
};

/// The full default document, which doubles as the key schema.
std::string default_config_yaml();

/// Mutable configuration tree. Loading and overriding collect every bad key
/// before throwing a single ConfigError.
class ConfigTree {
 public:
  ConfigTree();  // defaults

  void merge_file(const std::filesystem::path& path);
  void merge_text(const std::string& yaml_text, const std::string& origin = "<text>");
  /// Applies `dotted.key=value` overrides.
  void apply_overrides(const std::vector<std::string>& overrides);
  /// Applies POINTDA_SEED when it is set.
  void apply_environment();

  RunConfig resolve() const;
  /// Canonical YAML echo of the resolved tree.
  std::string dump() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Convenience: defaults + optional file + env + overrides, resolved.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides, std::string* echo = nullptr);

/// Rebuilds a RunConfig from an echo produced by ConfigTree::dump().
RunConfig parse_resolved_config(const std::string& yaml_text);

/// FNV-1a 64-bit hash, used to tag checkpoints with the config they came from.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace pointda

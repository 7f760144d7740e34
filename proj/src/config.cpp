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

#include "pointda/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "pointda/error.hpp"

namespace pointda {
namespace {

constexpr const char* kDefaults = R"(seed: 0
log_level: info
data:
  root: data
  n_source: 100
  n_target: 100
  source:
    image_size: 128
    count_range: [5, 15]
    dot_radius_range: [2.0, 3.0]
    background: flat
    illumination: 1.0
    blob_profile: gaussian
    seed: 1
  target:
    image_size: 128
    count_range: [5, 15]
    dot_radius_range: [4.0, 6.0]
    background: noise-texture
    illumination: 0.6
    blob_profile: gaussian
    seed: 2
model:
  variant: tiny
  stride: 8
  channels: 64
  depth: 4
  slots_per_cell: 4
  disc_channels: 32
  disc_layers: 4
  disc_leaky_slope: 0.2
loss:
  lambda_loc: 1.0
  lambda_cls: 1.0
  lambda_ent: 0.1
  lambda_adv: 0.001
  match_dist_weight: 0.05
  normalize_dis_loss: true
train:
  steps: 2000
  batch_source: 4
  batch_target: 4
  lr_main: 0.0001
  lr_disc: 0.0001
  enabled_losses: [ent_src, ent_tgt, adv]
  eval_interval: 500
  crop_size: 128
  flip_prob: 0.5
eval:
  threshold: 0.5
  thresholds: [0.3, 0.4, 0.5, 0.6, 0.7]
  visualize_count: 4
)";

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = fmt::format("{} configuration error(s):", errors.size());
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

void merge_into(YAML::Node schema, const YAML::Node& user, const std::string& prefix,
                std::vector<std::string>& errors) {
  if (!user.IsMap()) {
    errors.push_back(fmt::format("{}: expected a mapping", prefix.empty() ? "<root>" : prefix));
    return;
  }
  for (const auto& kv : user) {
    const auto key = kv.first.as<std::string>();
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema[key]) {
      errors.push_back(fmt::format("{}: unknown key", path));
      continue;
    }
    YAML::Node slot = schema[key];
    if (slot.IsMap()) {
      merge_into(slot, kv.second, path, errors);
    } else if (kv.second.IsMap()) {
      errors.push_back(fmt::format("{}: expected a value, got a mapping", path));
    } else {
      schema[key] = YAML::Clone(kv.second);
    }
  }
}

// Typed reads that record failures instead of throwing, so one pass reports
// every bad key.
class Reader {
 public:
  explicit Reader(const YAML::Node& root) : root_(root) {}

  template <typename T>
  T get(const std::string& path, T fallback) {
    const YAML::Node node = find(path);
    if (!node) {
      errors_.push_back(fmt::format("{}: missing", path));
      return fallback;
    }
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      errors_.push_back(fmt::format("{}: cannot read '{}' as {}", path, YAML::Dump(node),
                                    type_name<T>()));
      return fallback;
    }
  }

  template <typename E>
  E get_enum(const std::string& path, E fallback, const std::function<E(const std::string&)>& parse) {
    const auto text = get<std::string>(path, "");
    try {
      return parse(text);
    } catch (const Error& e) {
      errors_.push_back(fmt::format("{}: {}", path, e.what()));
      return fallback;
    }
  }

  void check(bool ok, const std::string& path, const std::string& message) {
    if (!ok) errors_.push_back(fmt::format("{}: {}", path, message));
  }
  void add(const std::string& message) { errors_.push_back(message); }
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  YAML::Node find(const std::string& path) const {
    YAML::Node node = YAML::Clone(root_);
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (!node.IsMap() || !node[key]) return YAML::Node();
      node = node[key];
      if (dot == std::string::npos) return node;
      start = dot + 1;
    }
  }

  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "bool";
    else if constexpr (std::is_integral_v<T>) return "integer";
    else if constexpr (std::is_floating_point_v<T>) return "number";
    else if constexpr (std::is_same_v<T, std::string>) return "string";
    else return "list";
  }

  YAML::Node root_;
  std::vector<std::string> errors_;
};

SceneParams read_scene(Reader& r, const std::string& prefix) {
  SceneParams p;
  p.image_size = r.get<int>(prefix + ".image_size", p.image_size);
  const auto counts = r.get<std::vector<int>>(prefix + ".count_range", {p.count_min, p.count_max});
  r.check(counts.size() == 2, prefix + ".count_range", "expected [min, max]");
  if (counts.size() == 2) {
    p.count_min = counts[0];
    p.count_max = counts[1];
  }
  const auto radii =
      r.get<std::vector<double>>(prefix + ".dot_radius_range", {p.radius_min, p.radius_max});
  r.check(radii.size() == 2, prefix + ".dot_radius_range", "expected [min, max]");
  if (radii.size() == 2) {
    p.radius_min = radii[0];
    p.radius_max = radii[1];
  }
  p.background = r.get_enum<Background>(prefix + ".background", p.background, parse_background);
  p.illumination = r.get<double>(prefix + ".illumination", p.illumination);
  p.blob_profile =
      r.get_enum<BlobProfile>(prefix + ".blob_profile", p.blob_profile, parse_blob_profile);
  p.seed = r.get<std::uint64_t>(prefix + ".seed", p.seed);
  try {
    p.validate();
  } catch (const Error& e) {
    r.add(fmt::format("{}: {}", prefix, e.what()));
  }
  return p;
}

RunConfig resolve_tree(const YAML::Node& root) {
  Reader r(root);
  RunConfig c;
  c.seed = r.get<std::uint64_t>("seed", 0);
  c.log_level = r.get<std::string>("log_level", "info");
  r.check(c.log_level == "trace" || c.log_level == "debug" || c.log_level == "info" ||
              c.log_level == "warn" || c.log_level == "error" || c.log_level == "off",
          "log_level", "expected one of trace, debug, info, warn, error, off");

  c.data.root = r.get<std::string>("data.root", c.data.root);
  c.data.n_source = r.get<std::size_t>("data.n_source", c.data.n_source);
  c.data.n_target = r.get<std::size_t>("data.n_target", c.data.n_target);
  c.data.pair.source = read_scene(r, "data.source");
  c.data.pair.target = read_scene(r, "data.target");
  if (c.data.pair.shift_axes().empty()) {
    r.add("data.target: identical to data.source, so there is no domain shift");
  }

  auto& bb = c.model.backbone;
  bb.variant = r.get_enum<BackboneVariant>("model.variant", bb.variant, parse_backbone_variant);
  bb.stride = r.get<int>("model.stride", bb.stride);
  bb.channels = r.get<int>("model.channels", bb.channels);
  bb.depth = r.get<int>("model.depth", bb.depth);
  bb.slots_per_cell = r.get<int>("model.slots_per_cell", bb.slots_per_cell);
  try {
    bb.validate();
  } catch (const Error& e) {
    r.add(fmt::format("model: {}", e.what()));
  }
  auto& dc = c.model.discriminator;
  dc.channels = r.get<int>("model.disc_channels", dc.channels);
  dc.layers = r.get<int>("model.disc_layers", dc.layers);
  dc.leaky_slope = r.get<float>("model.disc_leaky_slope", dc.leaky_slope);
  r.check(dc.channels > 0, "model.disc_channels", "must be positive");
  r.check(dc.layers > 0, "model.disc_layers", "must be positive");

  auto& t = c.train;
  t.weights.loc = r.get<double>("loss.lambda_loc", t.weights.loc);
  t.weights.cls = r.get<double>("loss.lambda_cls", t.weights.cls);
  t.weights.ent = r.get<double>("loss.lambda_ent", t.weights.ent);
  t.weights.adv = r.get<double>("loss.lambda_adv", t.weights.adv);
  t.match_dist_weight = r.get<double>("loss.match_dist_weight", t.match_dist_weight);
  t.normalize_dis_loss = r.get<bool>("loss.normalize_dis_loss", t.normalize_dis_loss);
  t.steps = r.get<std::int64_t>("train.steps", t.steps);
  t.batch_source = r.get<int>("train.batch_source", t.batch_source);
  t.batch_target = r.get<int>("train.batch_target", t.batch_target);
  t.lr_main = r.get<double>("train.lr_main", t.lr_main);
  t.lr_disc = r.get<double>("train.lr_disc", t.lr_disc);
  try {
    t.enabled = parse_enabled_losses(
        r.get<std::vector<std::string>>("train.enabled_losses", enabled_loss_names(t.enabled)));
  } catch (const Error& e) {
    r.add(fmt::format("train.enabled_losses: {}", e.what()));
  }
  t.eval_interval = r.get<std::int64_t>("train.eval_interval", t.eval_interval);
  const int crop = r.get<int>("train.crop_size", t.augment.crop_w);
  t.augment.crop_w = crop;
  t.augment.crop_h = crop;
  t.augment.flip_prob = r.get<double>("train.flip_prob", t.augment.flip_prob);
  t.seed = c.seed;

  c.eval.threshold = r.get<double>("eval.threshold", c.eval.threshold);
  c.eval.thresholds = r.get<std::vector<double>>("eval.thresholds", c.eval.thresholds);
  c.eval.visualize_count = r.get<int>("eval.visualize_count", c.eval.visualize_count);
  t.eval_threshold = c.eval.threshold;
  r.check(c.eval.threshold > 0.0 && c.eval.threshold < 1.0, "eval.threshold", "must be in (0, 1)");
  for (double th : c.eval.thresholds) {
    r.check(th > 0.0 && th < 1.0, "eval.thresholds", fmt::format("{} is not in (0, 1)", th));
  }
  r.check(c.eval.visualize_count >= 0, "eval.visualize_count", "must be >= 0");
  const int min_image = std::min(c.data.pair.source.image_size, c.data.pair.target.image_size);
  r.check(crop <= min_image, "train.crop_size",
          fmt::format("{} exceeds the smallest scene size {}", crop, min_image));

  std::vector<std::string> errors = r.errors();
  try {
    t.validate();
  } catch (const ConfigError& e) {
    errors.emplace_back(e.what());
  }
  if (!errors.empty()) throw ConfigError(join_errors(errors));
  return c;
}

}  // namespace

EnabledLosses parse_enabled_losses(const std::vector<std::string>& names) {
  EnabledLosses e{false, false, false};
  for (const auto& n : names) {
    if (n == "ent_src") e.ent_src = true;
    else if (n == "ent_tgt") e.ent_tgt = true;
    else if (n == "adv") e.adv = true;
    else throw InvalidArgument(fmt::format("unknown loss '{}' (ent_src, ent_tgt, adv)", n));
  }
  return e;
}

std::vector<std::string> enabled_loss_names(const EnabledLosses& e) {
  std::vector<std::string> out;
  if (e.ent_src) out.emplace_back("ent_src");
  if (e.ent_tgt) out.emplace_back("ent_tgt");
  if (e.adv) out.emplace_back("adv");
  return out;
}

void TrainConfig::validate() const {
  std::vector<std::string> errors;
  const auto check = [&](bool ok, const char* key, const std::string& msg) {
    if (!ok) errors.push_back(fmt::format("{}: {}", key, msg));
  };
  check(steps > 0, "train.steps", "must be > 0");
  check(batch_source > 0, "train.batch_source", "must be > 0");
  check(batch_target > 0, "train.batch_target", "must be > 0");
  check(lr_main > 0.0 && std::isfinite(lr_main), "train.lr_main", "must be > 0");
  check(lr_disc > 0.0 && std::isfinite(lr_disc), "train.lr_disc", "must be > 0");
  check(eval_interval > 0, "train.eval_interval", "must be > 0");
  check(match_dist_weight >= 0.0, "loss.match_dist_weight", "must be >= 0");
  check(augment.crop_w > 0 && augment.crop_h > 0, "train.crop_size", "must be > 0");
  check(augment.flip_prob >= 0.0 && augment.flip_prob <= 1.0, "train.flip_prob", "must be in [0, 1]");
  try {
    weights.validate();
  } catch (const Error& e) {
    errors.push_back(fmt::format("loss: {}", e.what()));
  }
  if (!errors.empty()) throw ConfigError(join_errors(errors));
}

std::string default_config_yaml() { return kDefaults; }

struct ConfigTree::Impl {
  YAML::Node root;
};

ConfigTree::ConfigTree() : impl_(std::make_shared<Impl>()) { impl_->root = YAML::Load(kDefaults); }

void ConfigTree::merge_text(const std::string& yaml_text, const std::string& origin) {
  YAML::Node user;
  try {
    user = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}: {}", origin, e.mark.line + 1, e.msg));
  }
  if (user.IsNull()) return;
  std::vector<std::string> errors;
  merge_into(impl_->root, user, "", errors);
  if (!errors.empty()) throw ConfigError(fmt::format("{}: {}", origin, join_errors(errors)));
}

void ConfigTree::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path.string());
}

void ConfigTree::apply_overrides(const std::vector<std::string>& overrides) {
  std::vector<std::string> errors;
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      errors.push_back(fmt::format("{}: overrides look like dotted.key=value", ov));
      continue;
    }
    const std::string path = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    // Build a nested document for the override and merge it like a file.
    YAML::Node patch;
    try {
      patch = YAML::Load(value.empty() ? "''" : value);
    } catch (const YAML::ParserException& e) {
      errors.push_back(fmt::format("{}: cannot parse value '{}': {}", path, value, e.msg));
      continue;
    }
    std::vector<std::string> keys;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      keys.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) {
      YAML::Node wrap(YAML::NodeType::Map);
      wrap[*it] = patch;
      patch = wrap;
    }
    merge_into(impl_->root, patch, "", errors);
  }
  if (!errors.empty()) throw ConfigError(join_errors(errors));
}

void ConfigTree::apply_environment() {
  if (const char* seed = std::getenv("POINTDA_SEED"); seed != nullptr && *seed != '\0') {
    apply_overrides({std::string("seed=") + seed});
  }
}

RunConfig ConfigTree::resolve() const { return resolve_tree(impl_->root); }

std::string ConfigTree::dump() const {
  YAML::Emitter out;
  out << impl_->root;
  return std::string(out.c_str()) + "\n";
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides, std::string* echo) {
  ConfigTree tree;
  if (file) tree.merge_file(*file);
  tree.apply_environment();
  tree.apply_overrides(overrides);
  RunConfig c = tree.resolve();
  if (echo != nullptr) *echo = tree.dump();
  return c;
}

RunConfig parse_resolved_config(const std::string& yaml_text) {
  ConfigTree tree;
  tree.merge_text(yaml_text, "<checkpoint config>");
  return tree.resolve();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pointda

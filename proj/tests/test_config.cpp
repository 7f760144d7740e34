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

#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "pointda/config.hpp"
#include "pointda/error.hpp"
#include "support.hpp"

using namespace pointda;
using pointda::testing::TempDir;

namespace {

// Restores POINTDA_SEED on scope exit.
class SeedEnv {
 public:
  explicit SeedEnv(const char* value) {
    if (const char* old = std::getenv("POINTDA_SEED")) saved_ = old;
    if (value) ::setenv("POINTDA_SEED", value, 1);
    else ::unsetenv("POINTDA_SEED");
  }
  ~SeedEnv() {
    if (saved_) ::setenv("POINTDA_SEED", saved_->c_str(), 1);
    else ::unsetenv("POINTDA_SEED");
  }

 private:
  std::optional<std::string> saved_;
};

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults resolve and validate") {
  SeedEnv env(nullptr);
  const RunConfig c = load_run_config(std::nullopt, {});
  CHECK(c.seed == 0);
  CHECK(c.model.backbone.stride == 8);
  CHECK(c.model.backbone.slots_per_cell == 4);
  CHECK(c.train.enabled == EnabledLosses{true, true, true});
  CHECK(c.train.seed == c.seed);
  CHECK(c.data.pair.shift_axes().size() == 3);
  CHECK_NOTHROW(c.train.validate());
}

TEST_CASE("dotted overrides") {
  SeedEnv env(nullptr);
  const RunConfig c = load_run_config(
      std::nullopt, {"seed=7", "train.steps=300", "train.enabled_losses=[adv]", "loss.lambda_adv=0.5"});
  CHECK(c.seed == 7);
  CHECK(c.train.steps == 300);
  CHECK(c.train.enabled == EnabledLosses{false, false, true});
  CHECK(c.train.weights.adv == 0.5);
}

TEST_CASE("file, environment and override precedence") {
  TempDir dir;
  {
    std::ofstream f(dir / "run.yaml");
    f << "seed: 3\ntrain:\n  steps: 40\n";
  }
  {
    SeedEnv env(nullptr);
    CHECK(load_run_config(dir / "run.yaml", {}).seed == 3);
  }
  {
    SeedEnv env("11");
    CHECK(load_run_config(dir / "run.yaml", {}).seed == 11);
    CHECK(load_run_config(dir / "run.yaml", {"seed=5"}).seed == 5);
    CHECK(load_run_config(dir / "run.yaml", {}).train.steps == 40);
  }
}

TEST_CASE("unknown keys are reported together") {
  SeedEnv env(nullptr);
  ConfigTree tree;
  const std::string msg = error_text([&] {
    tree.merge_text("trian:\n  steps: 3\nmodel:\n  strid: 4\n  depth: 3\n");
  });
  CHECK(msg.find("trian") != std::string::npos);
  CHECK(msg.find("model.strid") != std::string::npos);
  CHECK(msg.find("2 configuration error") != std::string::npos);

  const std::string ov = error_text([] { load_run_config(std::nullopt, {"train.stepz=3", "nokey"}); });
  CHECK(ov.find("train.stepz") != std::string::npos);
  CHECK(ov.find("nokey") != std::string::npos);
}

TEST_CASE("invalid values") {
  SeedEnv env(nullptr);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.steps=0"}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.lr_main=-1"}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"model.stride=6"}), ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.enabled_losses=[ent_src, bogus]"}),
                  ConfigError);
  CHECK_THROWS_AS(load_run_config(std::nullopt, {"train.steps=abc"}), ConfigError);
  ConfigTree tree;
  CHECK_THROWS_AS(tree.merge_text("train: [unclosed\n"), ConfigError);
  CHECK_THROWS_AS(tree.merge_file("/nonexistent/run.yaml"), ConfigError);
}

TEST_CASE("the echo round-trips") {
  SeedEnv env(nullptr);
  std::string echo;
  const RunConfig a = load_run_config(std::nullopt, {"seed=9", "train.steps=77", "data.n_source=12"}, &echo);
  const RunConfig b = parse_resolved_config(echo);
  CHECK(b.seed == 9);
  CHECK(b.train.steps == 77);
  CHECK(b.data.n_source == 12);
  CHECK(echo.find("seed: 9") != std::string::npos);
  ConfigTree again;
  again.merge_text(echo);
  CHECK(again.dump() == echo);
  CHECK(a.train.steps == b.train.steps);
}

TEST_CASE("loss name parsing") {
  CHECK(parse_enabled_losses({}) == EnabledLosses{false, false, false});
  CHECK(enabled_loss_names(EnabledLosses{true, false, true}) ==
        std::vector<std::string>{"ent_src", "adv"});
  CHECK_THROWS_AS(parse_enabled_losses({"loc"}), InvalidArgument);
}

TEST_CASE("fnv1a reference values") {
  // Published FNV-1a 64 test vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

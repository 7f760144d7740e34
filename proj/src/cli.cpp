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

#include "pointda/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "pointda/checkpoint.hpp"
#include "pointda/config.hpp"
#include "pointda/convert.hpp"
#include "pointda/data.hpp"
#include "pointda/error.hpp"
#include "pointda/evaluation.hpp"
#include "pointda/training.hpp"

namespace fs = std::filesystem;

namespace pointda {
namespace {

// Raised for command-line misuse that CLI11 itself cannot detect.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

class OutputExists : public Error {
 public:
  explicit OutputExists(const std::string& what) : Error("output-exists", what) {}
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
  cmd->add_option("--config,-c", c.config, "YAML config file");
  cmd->add_option("overrides", c.overrides, "dotted key=value overrides, e.g. train.steps=500");
  cmd->add_option("--out,-o", c.out, "output directory")->default_str(default_out);
  cmd->add_flag("--force", c.force, "write into a non-empty output directory");
}

std::string one_line(std::string s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\n') {
      while (i + 1 < s.size() && s[i + 1] == ' ') ++i;
      out += (!out.empty() && out.back() == ':') ? " " : "; ";
    } else {
      out += s[i];
    }
  }
  return out;
}

bool non_empty_dir(const fs::path& p) {
  return fs::is_directory(p) && fs::directory_iterator(p) != fs::directory_iterator();
}

void claim_out_dir(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) {
    throw OutputExists(fmt::format("{} exists and is not a directory", out.string()));
  }
  if (non_empty_dir(out) && !force) {
    throw OutputExists(fmt::format("{} is not empty; pass --force to overwrite", out.string()));
  }
  fs::create_directories(out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
  f << text;
}

struct Resolved {
  RunConfig config;
  std::string echo;
};

Resolved resolve(const Common& c, const std::optional<std::string>& base_yaml = std::nullopt) {
  ConfigTree tree;
  if (base_yaml) tree.merge_text(*base_yaml, "checkpoint");
  if (!c.config.empty()) tree.merge_file(c.config);
  tree.apply_environment();
  tree.apply_overrides(c.overrides);
  Resolved r{tree.resolve(), tree.dump()};
  spdlog::set_level(spdlog::level::from_str(r.config.log_level));
  return r;
}

fs::path out_or(const Common& c, const std::string& fallback) {
  return c.out.empty() ? fs::path(fallback) : fs::path(c.out);
}

TrainData open_train_data(const fs::path& root) {
  if (!fs::exists(root / "manifest.json")) {
    throw IoError(fmt::format("{} is not a dataset (no manifest.json); run generate-data first",
                              root.string()));
  }
  TrainData data{Dataset(root, Domain::source, Split::train), Dataset(root, Domain::target, Split::adapt),
                 Dataset(root, Domain::source, Split::eval), std::nullopt};
  if (fs::is_directory(root / "target" / "eval_labels")) {
    data.target_eval = Dataset(root, Domain::target, Split::eval);
  }
  return data;
}

int cmd_generate(const Common& c, std::ostream& out) {
  const Resolved r = resolve(c);
  const fs::path dir = out_or(c, r.config.data.root);
  if (c.force && fs::exists(dir / "manifest.json")) {
    // A previous dataset: clear it so stale scenes from a larger run cannot linger.
    fs::remove_all(dir / "source");
    fs::remove_all(dir / "target");
  }
  claim_out_dir(dir, c.force);
  const GeneratedCounts n =
      generate_domain_pair(r.config.data.pair, r.config.data.n_source, r.config.data.n_target, dir);
  write_text(dir / "config_resolved.yaml", r.echo);
  out << fmt::format("wrote {} source and {} target images to {}\n", n.source_images,
                     n.target_images, dir.string());
  return kExitOk;
}

int cmd_train(const Common& c, const std::string& data_root, const std::string& resume,
              std::int64_t stop_at, std::ostream& out) {
  const Resolved r = resolve(c);
  const fs::path dir = out_or(c, "runs/train");
  if (resume.empty()) {
    claim_out_dir(dir, c.force);
  } else {
    fs::create_directories(dir);
  }
  write_text(dir / "config_resolved.yaml", r.echo);
  const TrainData data = open_train_data(data_root.empty() ? r.config.data.root : data_root);
  TrainOptions opts;
  opts.out_dir = dir;
  opts.config_echo = r.echo;
  if (!resume.empty()) opts.resume_from = fs::path(resume);
  if (stop_at >= 0) opts.stop_at = stop_at;
  const TrainResult res = train(r.config, data, opts);
  out << fmt::format("trained to step {}; last checkpoint {}; best checkpoint {}\n", res.final_step,
                     res.last_checkpoint.string(), res.best_checkpoint.string());
  return kExitOk;
}

int cmd_ablate(const Common& c, const std::string& data_root, std::ostream& out) {
  const Resolved r = resolve(c);
  const fs::path dir = out_or(c, "runs/ablate");
  claim_out_dir(dir, c.force);
  write_text(dir / "config_resolved.yaml", r.echo);
  const TrainData data = open_train_data(data_root.empty() ? r.config.data.root : data_root);
  const auto rows = run_ablation(r.config, data, dir, r.echo);
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const AblationRow& a) { return !a.ok; });
  out << fmt::format("wrote {} ({} rows, {} failed)\n", (dir / "ablation_report.csv").string(),
                     rows.size(), failed);
  return failed == 0 ? kExitOk : kExitFailure;
}

struct Loaded {
  Resolved resolved;
  std::unique_ptr<TrainState> state;
};

Loaded load_model(const Common& c, const std::string& checkpoint) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  const CheckpointHeader h = read_checkpoint_header(checkpoint);
  Loaded l{resolve(c, h.config_yaml), nullptr};
  l.state = std::make_unique<TrainState>(l.resolved.config.model, l.resolved.config.train);
  load_checkpoint(checkpoint, *l.state);
  return l;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data_root,
             std::ostream& out) {
  Loaded l = load_model(c, checkpoint);
  const RunConfig& cfg = l.resolved.config;
  const fs::path dir = out_or(c, "runs/eval");
  claim_out_dir(dir, c.force);
  write_text(dir / "config_resolved.yaml", l.resolved.echo);
  const fs::path root = data_root.empty() ? fs::path(cfg.data.root) : fs::path(data_root);

  std::vector<Dataset> splits{Dataset(root, Domain::source, Split::eval)};
  if (fs::is_directory(root / "target" / "eval_labels")) {
    splits.emplace_back(root, Domain::target, Split::eval);
  }
  std::ofstream metrics(dir / "metrics.csv");
  std::ofstream sweep(dir / "threshold_sweep.csv");
  if (!metrics || !sweep) throw IoError(fmt::format("cannot write into {}", dir.string()));
  metrics << kMetricsCsvHeader << '\n';
  sweep << "dataset,split,threshold,mae,mse\n";
  out << kMetricsCsvHeader << '\n';
  for (const Dataset& ds : splits) {
    std::vector<double> thresholds = cfg.eval.thresholds;
    if (std::find(thresholds.begin(), thresholds.end(), cfg.eval.threshold) == thresholds.end()) {
      thresholds.push_back(cfg.eval.threshold);
    }
    for (MetricsRecord& rec : evaluate_sweep(l.state->main, ds, thresholds)) {
      rec.step = l.state->step;
      sweep << fmt::format("{},{},{},{:.6f},{:.6f}\n", rec.dataset, rec.split, rec.threshold,
                           rec.mae, rec.mse);
      if (rec.threshold != cfg.eval.threshold) continue;
      metrics << metrics_csv_row(rec) << '\n';
      out << metrics_csv_row(rec) << '\n';
      write_per_image_csv(dir / fmt::format("per_image_{}_{}.csv", rec.dataset, rec.split), rec);
    }
  }
  return kExitOk;
}

int cmd_visualize(const Common& c, const std::string& checkpoint, const std::string& data_root,
                  const std::string& domain, const std::string& split, int count,
                  std::ostream& out) {
  Loaded l = load_model(c, checkpoint);
  const RunConfig& cfg = l.resolved.config;
  const fs::path dir = out_or(c, "runs/visualize");
  claim_out_dir(dir, c.force);
  write_text(dir / "config_resolved.yaml", l.resolved.echo);
  if (domain != "source" && domain != "target") {
    throw UsageError(fmt::format("--domain must be source or target, got '{}'", domain));
  }
  const fs::path root = data_root.empty() ? fs::path(cfg.data.root) : fs::path(data_root);
  const Dataset ds(root, domain == "source" ? Domain::source : Domain::target, parse_split(split));
  const int n = std::min<int>(count >= 0 ? count : cfg.eval.visualize_count, static_cast<int>(ds.size()));
  for (int i = 0; i < n; ++i) {
    const ArtifactPaths p = render_artifacts(l.state->main, ds.get(i), dir, cfg.eval.threshold);
    out << p.overlay.string() << '\n' << p.entropy.string() << '\n';
  }
  return kExitOk;
}

int cmd_convert(const Common& c, const std::string& format, const std::string& input,
                bool list, std::ostream& out) {
  if (list) {
    for (const auto& name : annotation_format_names()) {
      out << name << ": " << annotation_format(name).description << '\n';
    }
    return kExitOk;
  }
  if (format.empty() || input.empty() || c.out.empty()) {
    throw UsageError("convert-annotations needs --format, --input and --out");
  }
  claim_out_dir(c.out, c.force);
  const std::size_t n = convert_annotations(format, input, c.out);
  out << fmt::format("converted {} file(s) into {}\n", n, c.out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  auto logger = std::make_shared<spdlog::logger>("pointda", sink);
  logger->set_pattern("[%H:%M:%S] [%l] %v");
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> p;
    ~Restore() { spdlog::set_default_logger(p); }
  } restore{previous};

  CLI::App app{"pointda: point-proposal counting with unsupervised domain adaptation"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  std::string data_root, checkpoint, resume, domain = "target", split = "eval", format, input;
  std::int64_t stop_at = -1;
  int count = -1;
  bool list_formats = false;

  auto* gen = app.add_subcommand("generate-data", "render the synthetic source/target pair");
  add_common(gen, common, "<data.root>");

  auto* trn = app.add_subcommand("train", "train with the configured losses");
  add_common(trn, common, "runs/train");
  trn->add_option("--data", data_root, "dataset root (default data.root)");
  trn->add_option("--resume", resume, "continue from this checkpoint");
  trn->add_option("--stop-at", stop_at, "stop after this many total steps");

  auto* abl = app.add_subcommand("ablate", "train every loss-component combination");
  add_common(abl, common, "runs/ablate");
  abl->add_option("--data", data_root, "dataset root (default data.root)");

  auto* ev = app.add_subcommand("eval", "count metrics of a checkpoint on the eval splits");
  add_common(ev, common, "runs/eval");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--data", data_root, "dataset root (default data.root)");

  auto* vis = app.add_subcommand("visualize", "write overlay and entropy PNGs");
  add_common(vis, common, "runs/visualize");
  vis->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  vis->add_option("--data", data_root, "dataset root (default data.root)");
  vis->add_option("--domain", domain, "source or target")->capture_default_str();
  vis->add_option("--split", split, "train, adapt or eval")->capture_default_str();
  vis->add_option("--count", count, "number of images (default eval.visualize_count)");

  auto* conv = app.add_subcommand("convert-annotations", "convert external point files to JSON");
  add_common(conv, common, "");
  conv->add_option("--format", format, "input format name");
  conv->add_option("--input", input, "file or directory to convert");
  conv->add_flag("--list-formats", list_formats, "print the registered formats");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << app.help();
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(common, out);
    if (trn->parsed()) return cmd_train(common, data_root, resume, stop_at, out);
    if (abl->parsed()) return cmd_ablate(common, data_root, out);
    if (ev->parsed()) return cmd_eval(common, checkpoint, data_root, out);
    if (vis->parsed()) return cmd_visualize(common, checkpoint, data_root, domain, split, count, out);
    if (conv->parsed()) return cmd_convert(common, format, input, list_formats, out);
  } catch (const Error& e) {
    err << "error: " << e.category() << ": " << one_line(e.what()) << '\n';
    const bool usage = e.category() == "usage" || e.category() == "config-error" ||
                       e.category() == "output-exists";
    return usage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pointda

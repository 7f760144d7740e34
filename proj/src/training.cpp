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

#include "pointda/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pointda/checkpoint.hpp"
#include "pointda/error.hpp"
#include "pointda/image.hpp"
#include "pointda/losses.hpp"
#include "pointda/matching.hpp"

namespace fs = std::filesystem;

namespace pointda {
namespace {

constexpr std::uint64_t kDiscSeedSalt = 0x9e3779b97f4a7c15ULL;

void add_scaled(SlotTensor& dst, const SlotTensor& src, double a) {
  auto& d = dst.data();
  const auto& s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += a * s[i];
}

void add_scaled(DomainMap& dst, const DomainMap& src, double a) {
  for (std::size_t i = 0; i < dst.probs.size(); ++i) dst.probs[i] += a * src.probs[i];
}

SpatialReduction reduction_of(const TrainConfig& c) {
  return c.normalize_dis_loss ? SpatialReduction::mean : SpatialReduction::sum;
}

Tensor batch_of(const std::vector<Sample>& samples) {
  std::vector<const Image*> images;
  images.reserve(samples.size());
  for (const Sample& s : samples) images.push_back(&s.image);
  return to_batch(images);
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string breakdown(const StepLog& l) {
  return fmt::format("L_loc={} L_cls={} L_ent_X={} L_ent_Y={} L_adv={}", l.loc, l.cls, l.ent_src,
                     l.ent_tgt, l.adv);
}

}  // namespace

std::string loss_csv_row(const StepLog& l) {
  return fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", l.step,
                     l.loc, l.cls, l.ent_src, l.ent_tgt, l.adv, l.dis_src, l.dis_tgt,
                     l.total_main, l.total_dis);
}

TrainState::TrainState(const ModelConfig& model, const TrainConfig& train)
    : model_config(model),
      seed(train.seed),
      main(model.backbone, train.seed),
      disc(4 * model.backbone.slots_per_cell, model.discriminator, train.seed ^ kDiscSeedSalt),
      main_opt(main.parameters(), train.lr_main),
      disc_opt(disc.parameters(), train.lr_disc) {}

StepLog main_update(TrainState& state, const std::vector<Sample>& src,
                    const std::vector<Sample>& tgt, const TrainConfig& config,
                    DetachedPredictions* detached) {
  if (src.empty() || tgt.empty()) throw InvalidArgument("train step needs both batches non-empty");
  for (const Sample& s : src) {
    if (!s.points) throw ContractViolation(fmt::format("source sample {} has no points", s.id));
  }
  for (const Sample& s : tgt) {
    if (s.points) {
      throw ContractViolation(fmt::format("target sample {} carries labels", s.id));
    }
  }
  const LossWeights& w = config.weights;
  StepLog log;
  state.main.zero_grad();
  state.disc.set_frozen(true);

  // Source: supervised terms plus optional source entropy.
  const Tensor src_images = batch_of(src);
  const auto src_maps = state.main.forward(src_images);
  const AnchorGrid grid = state.main.grid_for(src_images.width(), src_images.height());
  const double inv_bs = 1.0 / static_cast<double>(src.size());
  std::vector<PredictionGrads> src_grads;
  std::vector<LocationLoss> loc_losses;
  int with_matches = 0;
  for (std::size_t n = 0; n < src.size(); ++n) {
    const PredictionMaps& m = src_maps[n];
    PredictionGrads g = PredictionGrads::zeros_like(m);
    const Matching match =
        match_predictions(m.offsets, m.cls, *src[n].points, grid, config.match_dist_weight);
    const MatchTargets targets = derive_targets(match, *src[n].points, grid);
    log.clamped_targets += targets.clamped;

    OffsetMap g_loc(m.offsets.width(), m.offsets.height(), m.offsets.depth(), 2);
    const LocationLoss loc = location_loss(m.offsets, targets.loc, grid, LengthUnit::strides, &g_loc);
    loc_losses.push_back(loc);
    if (!loc.empty) ++with_matches;
    g.offsets = std::move(g_loc);  // rescaled below once the match count is known

    ClassificationMap g_cls(m.cls.width(), m.cls.height(), m.cls.depth(), 2);
    log.cls += classification_loss(m.cls, targets.positive, &g_cls) * inv_bs;
    add_scaled(g.cls, g_cls, w.cls * inv_bs);

    if (config.enabled.ent_src) {
      ClassificationMap g_ent(m.cls.width(), m.cls.height(), m.cls.depth(), 2);
      log.ent_src += entropy_loss(m.cls, &g_ent) * inv_bs;
      add_scaled(g.cls, g_ent, w.ent * inv_bs);
    }
    src_grads.push_back(std::move(g));
  }
  // L_loc averages over images that contribute at least one match.
  const double loc_scale = with_matches > 0 ? 1.0 / with_matches : 0.0;
  for (std::size_t n = 0; n < src.size(); ++n) {
    log.loc += loc_losses[n].value * loc_scale;
    for (double& v : src_grads[n].offsets.data()) v *= w.loc * loc_scale;
  }
  state.main.backward(src_grads);

  // Target: entropy and adversarial terms. The forward always runs because the
  // discriminator phase needs the target predictions.
  const Tensor tgt_images = batch_of(tgt);
  const auto tgt_maps = state.main.forward(tgt_images);
  const double inv_bt = 1.0 / static_cast<double>(tgt.size());
  std::vector<PredictionGrads> tgt_grads;
  tgt_grads.reserve(tgt.size());
  for (const PredictionMaps& m : tgt_maps) tgt_grads.push_back(PredictionGrads::zeros_like(m));
  if (config.enabled.ent_tgt) {
    for (std::size_t n = 0; n < tgt.size(); ++n) {
      const PredictionMaps& m = tgt_maps[n];
      ClassificationMap g_ent(m.cls.width(), m.cls.height(), m.cls.depth(), 2);
      log.ent_tgt += entropy_loss(m.cls, &g_ent) * inv_bt;
      add_scaled(tgt_grads[n].cls, g_ent, w.ent * inv_bt);
    }
  }
  Tensor tgt_concat = concat_predictions(tgt_maps);
  if (config.enabled.adv) {
    const auto dmaps = state.disc.forward(tgt_concat, Domain::target);
    std::vector<DomainMap> dgrads;
    dgrads.reserve(dmaps.size());
    for (const DomainMap& dm : dmaps) {
      DomainMap g(dm.width, dm.height, Domain::target, 0.0);
      DomainMap tmp(dm.width, dm.height, Domain::target, 0.0);
      log.adv += adversarial_loss(dm, reduction_of(config), &tmp) * inv_bt;
      add_scaled(g, tmp, w.adv * inv_bt);
      dgrads.push_back(std::move(g));
    }
    // Frozen: this only produces the input gradient.
    const Tensor d_concat = state.disc.backward(dgrads, true);
    for (std::size_t n = 0; n < tgt.size(); ++n) {
      const PredictionMaps routed = split_concat(d_concat, static_cast<int>(n));
      add_scaled(tgt_grads[n].offsets, routed.offsets, 1.0);
      add_scaled(tgt_grads[n].cls, routed.cls, 1.0);
    }
  }
  if (config.enabled.ent_tgt || config.enabled.adv) state.main.backward(tgt_grads);
  state.disc.set_frozen(false);

  const LossComponents comps{log.loc, log.cls, log.ent_src, log.ent_tgt, log.adv};
  try {
    log.total_main = main_objective(comps, w);
  } catch (const TrainingDivergence& e) {
    throw TrainingDivergence(fmt::format("step {}: {} ({})", state.step + 1, e.what(), breakdown(log)));
  }
  if (!std::isfinite(log.total_main)) {
    throw TrainingDivergence(
        fmt::format("step {}: total_main is not finite ({})", state.step + 1, breakdown(log)));
  }
  state.main_opt.step();

  if (detached) {
    detached->source = concat_predictions(src_maps);
    detached->target = std::move(tgt_concat);
  }
  return log;
}

void discriminator_update(TrainState& state, const DetachedPredictions& detached,
                          const TrainConfig& config, StepLog& log) {
  state.disc.zero_grad();
  log.dis_src = 0.0;
  log.dis_tgt = 0.0;
  const std::pair<const Tensor*, Domain> parts[] = {{&detached.source, Domain::source},
                                                    {&detached.target, Domain::target}};
  for (const auto& [input, domain] : parts) {
    const auto dmaps = state.disc.forward(*input, domain);
    const double inv_b = 1.0 / static_cast<double>(dmaps.size());
    double total = 0.0;
    std::vector<DomainMap> grads;
    grads.reserve(dmaps.size());
    for (const DomainMap& dm : dmaps) {
      DomainMap g(dm.width, dm.height, domain, 0.0);
      DomainMap tmp(dm.width, dm.height, domain, 0.0);
      total += discriminator_loss(dm, reduction_of(config), &tmp) * inv_b;
      add_scaled(g, tmp, inv_b);
      grads.push_back(std::move(g));
    }
    state.disc.backward(grads, false);
    (domain == Domain::source ? log.dis_src : log.dis_tgt) = total;
  }
  log.total_dis = discriminator_objective(log.dis_src, log.dis_tgt);
  if (!std::isfinite(log.total_dis)) {
    throw TrainingDivergence(fmt::format("step {}: discriminator loss is not finite (L_dis_X={} L_dis_Y={})",
                                         state.step + 1, log.dis_src, log.dis_tgt));
  }
  state.disc_opt.step();
}

StepLog train_step(TrainState& state, const std::vector<Sample>& src,
                   const std::vector<Sample>& tgt, const TrainConfig& config) {
  DetachedPredictions detached;
  StepLog log = main_update(state, src, tgt, config, &detached);
  discriminator_update(state, detached, config, log);
  ++state.step;
  log.step = state.step;
  return log;
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch, std::int64_t step,
                                       std::uint64_t seed, Domain domain) {
  if (dataset_size == 0) throw InvalidArgument("cannot sample from an empty dataset");
  if (batch <= 0) throw InvalidArgument("batch size must be positive");
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::int64_t cached_epoch = -1;
  std::vector<std::size_t> perm(dataset_size);
  const auto n = static_cast<std::int64_t>(dataset_size);
  for (int b = 0; b < batch; ++b) {
    const std::int64_t pos = step * batch + b;
    const std::int64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(mix_seed({seed, static_cast<std::uint64_t>(domain),
                                    static_cast<std::uint64_t>(epoch)}));
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[static_cast<std::size_t>(pos % n)]);
  }
  return out;
}

namespace {

std::vector<Sample> draw_batch(const Dataset& data, int batch, std::int64_t step,
                               const TrainConfig& config, Domain domain) {
  std::vector<Sample> out;
  const auto idx = batch_indices(data.size(), batch, step, config.seed, domain);
  out.reserve(idx.size());
  for (std::size_t slot = 0; slot < idx.size(); ++slot) {
    std::mt19937_64 rng(mix_seed({config.seed, static_cast<std::uint64_t>(domain) + 16,
                                  static_cast<std::uint64_t>(step), slot}));
    out.push_back(augment(data.get(idx[slot]), config.augment, rng));
  }
  return out;
}

// Keeps the header and every row whose leading step field is <= max_step.
void truncate_csv(const fs::path& path, const char* header, std::int64_t max_step,
                  int step_field) {
  std::vector<std::string> kept{header};
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        continue;
      }
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string field;
      for (int f = 0; f <= step_field; ++f) std::getline(ss, field, ',');
      try {
        if (std::stoll(field) <= max_step) kept.push_back(line);
      } catch (const std::exception&) {
        throw ParseError(fmt::format("{}: malformed row '{}'", path.string(), line));
      }
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  for (const auto& l : kept) out << l << '\n';
}

std::ofstream open_append(const fs::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  return out;
}

}  // namespace

TrainResult train(const RunConfig& config, const TrainData& data, const TrainOptions& options) {
  const TrainConfig& tc = config.train;
  tc.validate();
  if (data.source_train.size() == 0) throw InvalidArgument("source training split is empty");
  if (data.target_adapt.size() == 0) throw InvalidArgument("target adaptation split is empty");
  fs::create_directories(options.out_dir);

  TrainState state(config.model, tc);
  TrainResult result;
  result.last_checkpoint = options.out_dir / "checkpoint_last.bin";
  result.best_checkpoint = options.out_dir / "checkpoint_best.bin";
  const fs::path losses_path = options.out_dir / "losses.csv";
  const fs::path metrics_path = options.out_dir / "metrics.csv";

  if (options.resume_from) {
    const CheckpointHeader h = load_checkpoint(*options.resume_from, state);
    if (h.config_hash != fnv1a64(options.config_echo)) {
      spdlog::warn("resuming from {} with a different configuration", options.resume_from->string());
    }
    if (!options.quiet) spdlog::info("resumed at step {}", state.step);
    // Rows past the checkpoint came from an interrupted tail and are replayed.
    truncate_csv(losses_path, kLossCsvHeader, state.step, 0);
    truncate_csv(metrics_path, kMetricsCsvHeader, state.step, 2);
  } else {
    truncate_csv(losses_path, kLossCsvHeader, -1, 0);
    truncate_csv(metrics_path, kMetricsCsvHeader, -1, 2);
  }
  std::ofstream losses = open_append(losses_path);
  std::ofstream metrics = open_append(metrics_path);

  auto run_eval = [&] {
    MetricsRecord src = evaluate(state.main, data.source_eval, tc.eval_threshold);
    src.step = state.step;
    metrics << metrics_csv_row(src) << '\n';
    if (data.target_eval) {
      MetricsRecord tgt = evaluate(state.main, *data.target_eval, tc.eval_threshold);
      tgt.step = state.step;
      metrics << metrics_csv_row(tgt) << '\n';
      if (!options.quiet) {
        spdlog::info("step {:>6}  source MAE {:.3f} RMSE {:.3f}  target MAE {:.3f} RMSE {:.3f} H {:.3f}",
                     state.step, src.mae, src.mse, tgt.mae, tgt.mse, tgt.mean_entropy);
      }
      result.evaluations.push_back(src);
      result.evaluations.push_back(std::move(tgt));
    } else {
      if (!options.quiet) {
        spdlog::info("step {:>6}  source MAE {:.3f} RMSE {:.3f}", state.step, src.mae, src.mse);
      }
      result.evaluations.push_back(src);
    }
    metrics.flush();
    if (state.best_metric < 0.0 || src.mae < state.best_metric) {
      state.best_metric = src.mae;
      state.best_step = state.step;
      save_checkpoint(result.best_checkpoint, state, options.config_echo);
    }
  };

  if (state.step == 0) run_eval();
  const std::int64_t end = options.stop_at ? std::min(*options.stop_at, tc.steps) : tc.steps;
  while (state.step < end) {
    const auto src = draw_batch(data.source_train, tc.batch_source, state.step, tc, Domain::source);
    const auto tgt = draw_batch(data.target_adapt, tc.batch_target, state.step, tc, Domain::target);
    StepLog log = train_step(state, src, tgt, tc);
    if (log.clamped_targets > 0) {
      spdlog::debug("step {}: {} unreachable targets clamped", log.step, log.clamped_targets);
    }
    losses << loss_csv_row(log) << '\n';
    result.logs.push_back(log);
    if (state.step % tc.eval_interval == 0 || state.step == tc.steps) {
      losses.flush();
      run_eval();
      save_checkpoint(result.last_checkpoint, state, options.config_echo);
    }
  }
  losses.flush();
  save_checkpoint(result.last_checkpoint, state, options.config_echo);
  result.final_step = state.step;
  return result;
}

std::vector<std::pair<std::string, EnabledLosses>> ablation_configurations() {
  return {
      {"supervised", {false, false, false}},
      {"ent_src", {true, false, false}},
      {"ent_tgt", {false, true, false}},
      {"ent_src+ent_tgt", {true, true, false}},
      {"adv", {false, false, true}},
      {"all", {true, true, true}},
  };
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const TrainData& data,
                                      const fs::path& out_dir, const std::string& config_echo,
                                      bool quiet) {
  if (!data.target_eval) {
    throw MissingLabels("ablation needs target eval labels to report adapted error");
  }
  fs::create_directories(out_dir);
  std::vector<AblationRow> rows;
  for (const auto& [name, enabled] : ablation_configurations()) {
    AblationRow row;
    row.name = name;
    row.enabled = enabled;
    RunConfig cfg = base;
    cfg.train.enabled = enabled;
    std::string dir = name;
    std::replace(dir.begin(), dir.end(), '+', '_');
    if (!quiet) spdlog::info("ablation row {}", name);
    try {
      TrainOptions opts;
      opts.out_dir = out_dir / dir;
      opts.config_echo = config_echo;
      opts.quiet = quiet;
      const TrainResult r = train(cfg, data, opts);
      // Final-step records; both domains are evaluated at the last step.
      for (const MetricsRecord& m : r.evaluations) {
        if (m.step != r.final_step) continue;
        if (m.dataset == "source") {
          row.source_mae = m.mae;
          row.source_mse = m.mse;
        } else {
          row.adapted_mae = m.mae;
          row.adapted_mse = m.mse;
          row.adapted_entropy = m.mean_entropy;
        }
      }
      row.ok = true;
    } catch (const Error& e) {
      row.error = fmt::format("{}: {}", e.category(), e.what());
      spdlog::error("ablation row {} failed: {}", name, row.error);
    }
    rows.push_back(std::move(row));
  }

  std::ofstream out(out_dir / "ablation_report.csv", std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", (out_dir / "ablation_report.csv").string()));
  out << kAblationCsvHeader << '\n';
  for (const AblationRow& r : rows) {
    if (r.ok) {
      out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},ok\n", r.name, r.source_mae, r.source_mse,
                         r.adapted_mae, r.adapted_mse);
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << fmt::format("{},,,,,failed: {}\n", r.name, msg);
    }
  }
  return rows;
}

}  // namespace pointda

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

// Alternating source/target training: one main-network update on the weighted
// objective with the discriminator frozen, then one discriminator update on
// detached predictions from the same step.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pointda/config.hpp"
#include "pointda/data.hpp"
#include "pointda/evaluation.hpp"
#include "pointda/network.hpp"
#include "pointda/optim.hpp"

namespace pointda {

struct StepLog {
  std::int64_t step = 0;
  double loc = 0.0;
  double cls = 0.0;
  double ent_src = 0.0;
  double ent_tgt = 0.0;
  double adv = 0.0;
  double dis_src = 0.0;
  double dis_tgt = 0.0;
  double total_main = 0.0;
  double total_dis = 0.0;
  int clamped_targets = 0;

  bool operator==(const StepLog&) const = default;
};

inline constexpr const char* kLossCsvHeader =
    "step,L_loc,L_cls,L_ent_X,L_ent_Y,L_adv,L_dis_X,L_dis_Y,total_main,total_dis";
std::string loss_csv_row(const StepLog& log);

/// Everything that evolves during training. Owns both networks and their
/// optimizers; the data order is a pure function of (seed, step), so the step
/// counter is the only sampling state.
struct TrainState {
  TrainState(const ModelConfig& model, const TrainConfig& train);
  // The optimizers hold pointers into the networks.
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  ModelConfig model_config;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  PointProposalNet main;
  Discriminator disc;
  Adam main_opt;
  Adam disc_opt;
  double best_metric = -1.0;  // lowest source-eval MAE seen, -1 if none
  std::int64_t best_step = -1;
};

/// Predictions kept from the main phase for the discriminator phase.
struct DetachedPredictions {
  Tensor source;
  Tensor target;
};

/// Main-network phase: supervised losses on `src`, entropy/adversarial losses
/// on `tgt`, one optimizer step on the main parameters only. The
/// discriminator is frozen for the duration. Target samples must not carry
/// points (throws ContractViolation).
StepLog main_update(TrainState& state, const std::vector<Sample>& src,
                    const std::vector<Sample>& tgt, const TrainConfig& config,
                    DetachedPredictions* detached);

/// Discriminator phase on detached predictions; updates only the
/// discriminator. Fills the dis_* and total_dis fields of `log`.
void discriminator_update(TrainState& state, const DetachedPredictions& detached,
                          const TrainConfig& config, StepLog& log);

/// main_update + discriminator_update, then advances the step counter.
StepLog train_step(TrainState& state, const std::vector<Sample>& src,
                   const std::vector<Sample>& tgt, const TrainConfig& config);

/// Deterministic batch sampler: each epoch is a fresh permutation seeded from
/// (seed, domain, epoch); the batch for a step is read off that sequence.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch, std::int64_t step,
                                       std::uint64_t seed, Domain domain);

struct TrainData {
  Dataset source_train;
  Dataset target_adapt;
  Dataset source_eval;
  std::optional<Dataset> target_eval;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  /// Stop (and write the last checkpoint) once this many steps are done.
  std::optional<std::int64_t> stop_at;
  std::string config_echo;  // embedded in checkpoints
  bool quiet = false;
};

struct TrainResult {
  std::vector<StepLog> logs;                // this invocation only
  std::vector<MetricsRecord> evaluations;   // this invocation only
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
  std::int64_t final_step = 0;
};

/// Runs `steps` train steps with periodic evaluation, writing losses.csv,
/// metrics.csv, checkpoint_last.bin and checkpoint_best.bin into out_dir.
/// Resumed runs append to the existing CSVs.
TrainResult train(const RunConfig& config, const TrainData& data, const TrainOptions& options);

struct AblationRow {
  std::string name;
  EnabledLosses enabled;
  bool ok = false;
  std::string error;
  double source_mae = 0.0, source_mse = 0.0;
  double adapted_mae = 0.0, adapted_mse = 0.0;
  double adapted_entropy = 0.0;
};

/// Baseline plus the five loss-component rows, in report order.
std::vector<std::pair<std::string, EnabledLosses>> ablation_configurations();

inline constexpr const char* kAblationCsvHeader =
    "components,source_mae,source_mse,adapted_mae,adapted_mse,status";

/// Trains every ablation configuration with the shared seed. Failed rows are
/// recorded with status "failed: ..." and the rest still run. Writes
/// ablation_report.csv into out_dir.
std::vector<AblationRow> run_ablation(const RunConfig& base, const TrainData& data,
                                      const std::filesystem::path& out_dir,
                                      const std::string& config_echo, bool quiet = false);

}  // namespace pointda

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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 5-7 train on the acceptance config (several
// minutes on one core); the rest finish in seconds.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pointda/checkpoint.hpp"
#include "pointda/config.hpp"
#include "pointda/evaluation.hpp"
#include "pointda/geometry.hpp"
#include "pointda/losses.hpp"
#include "pointda/matching.hpp"
#include "pointda/training.hpp"
#include "support.hpp"

using namespace pointda;
using pointda::testing::rel_error;
using pointda::testing::slurp;
using pointda::testing::TempDir;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kExactTol = 1e-12;          // closed-form loss values
constexpr double kRecombineTol = 1e-6;       // relative, weighted total
constexpr double kLossSuiteSeconds = 5.0;
constexpr double kFdStep = 1e-4;
constexpr double kFdRelTol = 1e-3;
constexpr double kFdFloor = 1e-6;            // gradients below this compare absolutely
constexpr double kGradSeconds = 30.0;
constexpr int kMatchingTrials = 500;
constexpr int kMatchingMaxSize = 7;
constexpr double kMatchingSeconds = 30.0;
constexpr int kRoundTripPoints = 10000;
constexpr double kRoundTripTol = 1e-9;       // pixels
constexpr double kRoundTripSeconds = 5.0;
constexpr double kSupervisedMaxMae = 2.0;
constexpr double kSupervisedBaselineFactor = 5.0;
constexpr double kSupervisedSeconds = 15 * 60.0;
constexpr double kTargetGain = 0.10;         // adapted MAE at least 10% lower
constexpr double kSourceSlack = 0.30;        // source MAE at most 30% higher
constexpr double kAdaptationSeconds = 90 * 60.0;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt::format("{:.3f}", x);
  return s;
}

// ---- criterion 1 -----------------------------------------------------------

Outcome loss_oracles() {
  const auto t0 = Clock::now();
  std::vector<std::string> failures;
  int checks = 0;
  auto expect = [&](const std::string& what, double got, double want, double tol) {
    ++checks;
    if (!(std::abs(got - want) <= tol)) failures.push_back(fmt::format("{}={} want {}", what, got, want));
  };
  auto one_slot = [](double pos) {
    ClassificationMap m(1, 1, 1, 2);
    m.at(0, 0, 0, 0) = pos;
    m.at(0, 0, 0, 1) = 1.0 - pos;
    return m;
  };
  // Entropy in bits, normalised by log2 of the class count (2).
  auto h2 = [](double p) {
    double h = 0;
    for (double q : {p, 1 - p}) h -= q > 0 ? q * std::log2(q) : 0.0;
    return h;
  };
  expect("H(0.5,0.5)", entropy_loss(one_slot(0.5)), 1.0, kExactTol);
  expect("H(1,0)", entropy_loss(one_slot(1.0)), 0.0, 1e-9);
  expect("H(0.9,0.1)", entropy_loss(one_slot(0.9)), h2(0.9), kExactTol);
  {
    ClassificationMap m(2, 1, 1, 2);
    m.at(0, 0, 0, 0) = 0.5, m.at(0, 0, 0, 1) = 0.5;
    m.at(1, 0, 0, 0) = 1.0, m.at(1, 0, 0, 1) = 0.0;
    expect("mean H", entropy_loss(m), 0.5, 1e-9);
  }
  expect("CE uniform", classification_loss(one_slot(0.5), {0}), std::log(2.0), kExactTol);
  expect("CE pos 0.9", classification_loss(one_slot(0.9), {1}), -std::log(0.9), kExactTol);
  expect("CE perfect", classification_loss(one_slot(1.0), {1}), 0.0, 2 * kProbEpsilon);
  {
    const AnchorGrid g = build_anchor_grid(16, 16, 8, 1);
    OffsetMap pred(2, 2, 1, 2);
    pred.at(0, 0, 0, 0) = 3.0 / 8.0;
    pred.at(0, 0, 0, 1) = 4.0 / 8.0;
    expect("L_loc 3-4-5", location_loss(pred, {{0, 0.0, 0.0}}, g).value, 5.0, kExactTol);
    expect("L_loc mean", location_loss(pred, {{0, 0.0, 0.0}, {1, 0.0, 0.0}}, g).value, 2.5, kExactTol);
    expect("L_loc strides", location_loss(pred, {{0, 0.0, 0.0}}, g, LengthUnit::strides).value,
           5.0 / 8.0, kExactTol);
  }
  {
    const DomainMap half(1, 1, Domain::source, 0.5);
    expect("L_dis single cell", discriminator_loss(half), std::log(2.0), kExactTol);
    DomainMap four(2, 2, Domain::target, 0.5);
    expect("L_dis 2x2 sum", discriminator_loss(four), 4 * std::log(2.0), kExactTol);
    expect("L_dis 2x2 mean", discriminator_loss(four, SpatialReduction::mean), std::log(2.0), kExactTol);
    DomainMap row(3, 1, Domain::target, 0.0);
    const double dx[] = {1.0, 0.5, 0.25};
    for (int c = 0; c < 3; ++c) {
      row.probs[2 * c] = dx[c];
      row.probs[2 * c + 1] = 1.0 - dx[c];
    }
    expect("L_adv 3x1", adversarial_loss(row), std::log(2.0) + std::log(4.0), kExactTol);
  }
  {
    const LossWeights w{1.0, 1.0, 0.1, 0.01};
    const LossComponents c{2.0, 0.5, 0.8, 0.9, 3.0};
    const double total = main_objective(c, w);
    checks += 2;
    if (rel_error(total, 2.70) > kRecombineTol) failures.push_back(fmt::format("total {} want 2.70", total));
    const LossWeights off{1.0, 1.0, 0.0, 0.0};
    if (rel_error(main_objective(c, off), 2.5) > kRecombineTol) failures.push_back("supervised-only total");
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures.empty() && secs < kLossSuiteSeconds;
  o.detail = failures.empty() ? fmt::format("{} oracle values, {:.3f} s", checks, secs)
                              : fmt::format("{} mismatches, first: {}", failures.size(), failures[0]);
  return o;
}

// ---- criterion 2 -----------------------------------------------------------

double fd_error(std::vector<double>& x, const std::function<double()>& f, const std::vector<double>& analytic) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kFdStep;
    const double up = f();
    x[i] = saved - kFdStep;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2 * kFdStep), kFdFloor));
  }
  return worst;
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> off(-0.9, 0.9), prob(0.05, 0.95);
  auto random_cls = [&] {
    ClassificationMap m(4, 4, 2, 2);
    for (std::size_t s = 0; s < m.num_slots(); ++s) {
      m.slot(s, 0) = prob(rng);
      m.slot(s, 1) = 1.0 - m.slot(s, 0);
    }
    return m;
  };
  auto random_domain = [&](Domain d) {
    DomainMap m(4, 4, d, 0.0);
    for (std::size_t c = 0; c < m.num_cells(); ++c) {
      m.probs[2 * c] = prob(rng);
      m.probs[2 * c + 1] = 1.0 - m.probs[2 * c];
    }
    return m;
  };
  std::vector<std::pair<std::string, double>> errs;

  {
    const AnchorGrid g = build_anchor_grid(32, 32, 8, 2);
    OffsetMap pred(4, 4, 2, 2);
    for (double& v : pred.data()) v = off(rng);
    std::vector<LocationTarget> t;
    for (std::size_t s : {1u, 6u, 11u, 20u, 27u}) t.push_back({s, off(rng), off(rng)});
    OffsetMap grad(4, 4, 2, 2);
    location_loss(pred, t, g, LengthUnit::pixels, &grad);
    errs.emplace_back("L_loc", fd_error(pred.data(), [&] { return location_loss(pred, t, g).value; }, grad.data()));
  }
  {
    ClassificationMap m = random_cls();
    std::vector<std::uint8_t> pos(m.num_slots());
    for (std::size_t s = 0; s < pos.size(); ++s) pos[s] = rng() % 4 == 0;
    ClassificationMap grad(4, 4, 2, 2);
    classification_loss(m, pos, &grad);
    errs.emplace_back("L_cls", fd_error(m.data(), [&] { return classification_loss(m, pos); }, grad.data()));
  }
  {
    ClassificationMap m = random_cls();
    ClassificationMap grad(4, 4, 2, 2);
    entropy_loss(m, &grad);
    errs.emplace_back("L_ent", fd_error(m.data(), [&] { return entropy_loss(m); }, grad.data()));
  }
  {
    DomainMap m = random_domain(Domain::target);
    DomainMap grad(4, 4, Domain::target, 0.0);
    adversarial_loss(m, SpatialReduction::sum, &grad);
    errs.emplace_back("L_adv", fd_error(m.probs, [&] { return adversarial_loss(m); }, grad.probs));
  }
  for (Domain d : {Domain::source, Domain::target}) {
    DomainMap m = random_domain(d);
    DomainMap grad(4, 4, d, 0.0);
    discriminator_loss(m, SpatialReduction::sum, &grad);
    errs.emplace_back(fmt::format("L_dis_{}", d == Domain::source ? "X" : "Y"),
                      fd_error(m.probs, [&] { return discriminator_loss(m); }, grad.probs));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = secs < kGradSeconds;
  std::string parts;
  for (const auto& [name, e] : errs) {
    o.pass = o.pass && e <= kFdRelTol;
    parts += fmt::format("{}{} {:.1e}", parts.empty() ? "" : ", ", name, e);
  }
  o.detail = fmt::format("max rel error: {}; {:.3f} s", parts, secs);
  return o;
}

// ---- criterion 3 -----------------------------------------------------------

double brute_force_min(const CostMatrix& c) {
  std::vector<std::size_t> rows(c.rows());
  std::iota(rows.begin(), rows.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t g = 0; g < c.cols(); ++g) total += c(rows[g], g);
    best = std::min(best, total);
  } while (std::next_permutation(rows.begin(), rows.end()));
  return best;
}

Outcome matching_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(1, kMatchingMaxSize);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  int mismatches = 0;
  for (int t = 0; t < kMatchingTrials; ++t) {
    const std::size_t cols = size(rng);
    const std::size_t rows = std::uniform_int_distribution<std::size_t>(cols, kMatchingMaxSize)(rng);
    CostMatrix c(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < cols; ++k) c(r, k) = val(rng);
    }
    if (hungarian_assign(c).total_cost != brute_force_min(c)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kMatchingSeconds,
          fmt::format("{} matrices up to {}x{}, {} mismatches, {:.3f} s", kMatchingTrials, kMatchingMaxSize,
                      kMatchingMaxSize, mismatches, secs)};
}

// ---- criterion 4 -----------------------------------------------------------

Outcome geometry_round_trip() {
  const auto t0 = Clock::now();
  const AnchorGrid g = build_anchor_grid(128, 128, 8, 4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coord(0.0, 127.0);
  std::uniform_int_distribution<int> nudge(-1, 1);
  double worst = 0.0;
  int unreachable = 0;
  for (int n = 0; n < kRoundTripPoints; ++n) {
    const Point p{coord(rng), coord(rng)};
    // Any cell within one stride of the point, including neighbours.
    const CellIndex c{std::clamp(static_cast<int>(p.x / 8) + nudge(rng), 0, 15),
                      std::clamp(static_cast<int>(p.y / 8) + nudge(rng), 0, 15)};
    if (!reachable(p, c, 8)) {
      ++unreachable;
      continue;
    }
    const auto [di, dj] = encode_offsets(p, c, g);
    const Point q = decode_point(di, dj, c, 8);
    worst = std::max({worst, std::abs(q.x - p.x), std::abs(q.y - p.y)});
  }
  // Top up so exactly kRoundTripPoints reachable points are checked.
  std::uniform_real_distribution<double> delta(-1.0, 1.0);
  std::uniform_int_distribution<int> cell(0, 15);
  for (int n = 0; n < unreachable; ++n) {
    const CellIndex c{cell(rng), cell(rng)};
    const Point p = decode_point(delta(rng), delta(rng), c, 8);
    const auto [di, dj] = encode_offsets(p, c, g);
    const Point q = decode_point(di, dj, c, 8);
    worst = std::max({worst, std::abs(q.x - p.x), std::abs(q.y - p.y)});
  }
  const double secs = seconds_since(t0);
  return {worst <= kRoundTripTol && secs < kRoundTripSeconds,
          fmt::format("{} points, max error {:.2e} px, {:.3f} s", kRoundTripPoints, worst, secs)};
}

// ---- criteria 5-7 ----------------------------------------------------------

struct RunSummary {
  double source_mae = 0, target_mae = 0;
  double target_entropy_start = 0, target_entropy_end = 0;
  double seconds = 0;
};

struct AdaptationRuns {
  std::vector<RunSummary> supervised, full;
  double baseline_mae = 0;  // predict-zero source MAE
  double seconds = 0;
  std::string error;
};

AdaptationRuns run_adaptation() {
  AdaptationRuns out;
  const auto t0 = Clock::now();
  try {
    const fs::path cfg_file = fs::path(POINTDA_CONFIG_DIR) / "acceptance.yaml";
    TempDir dir;
    const RunConfig base = load_run_config(cfg_file, {"seed=0"});
    generate_domain_pair(base.data.pair, base.data.n_source, base.data.n_target, dir / "data");
    TrainData data{load_dataset(dir / "data", Domain::source, Split::train),
                   load_dataset(dir / "data", Domain::target, Split::adapt),
                   load_dataset(dir / "data", Domain::source, Split::eval),
                   load_dataset(dir / "data", Domain::target, Split::eval)};
    double gt_total = 0;
    for (std::size_t i = 0; i < data.source_eval.size(); ++i) gt_total += data.source_eval.get(i).points->size();
    out.baseline_mae = gt_total / static_cast<double>(data.source_eval.size());

    for (std::uint64_t seed : kSeeds) {
      for (bool full : {false, true}) {
        std::vector<std::string> ov{fmt::format("seed={}", seed)};
        if (!full) ov.push_back("train.enabled_losses=[]");
        std::string echo;
        const RunConfig cfg = load_run_config(cfg_file, ov, &echo);
        TrainOptions opts;
        opts.out_dir = dir / fmt::format("{}_{}", full ? "all" : "supervised", seed);
        opts.config_echo = echo;
        opts.quiet = true;
        const auto r0 = Clock::now();
        const TrainResult res = train(cfg, data, opts);
        RunSummary s;
        s.seconds = seconds_since(r0);
        for (const MetricsRecord& m : res.evaluations) {
          if (m.dataset == "target" && m.step == 0) s.target_entropy_start = m.mean_entropy;
          if (m.step != res.final_step) continue;
          if (m.dataset == "source") s.source_mae = m.mae;
          if (m.dataset == "target") {
            s.target_mae = m.mae;
            s.target_entropy_end = m.mean_entropy;
          }
        }
        std::cout << fmt::format("  [{} seed {}] source MAE {:.3f}  target MAE {:.3f}  target H {:.3f} -> {:.3f}  ({:.0f} s)\n",
                                 full ? "all" : "supervised", seed, s.source_mae, s.target_mae,
                                 s.target_entropy_start, s.target_entropy_end, s.seconds)
                  << std::flush;
        (full ? out.full : out.supervised).push_back(s);
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = seconds_since(t0);
  return out;
}

Outcome supervised_sanity(const AdaptationRuns& r) {
  if (!r.error.empty()) return {false, "training failed: " + r.error};
  const RunSummary& s = r.supervised.at(0);
  const bool pass = s.source_mae <= kSupervisedMaxMae &&
                    s.source_mae * kSupervisedBaselineFactor <= r.baseline_mae && s.seconds <= kSupervisedSeconds;
  return {pass, fmt::format("source MAE {:.3f} (limit {:.1f}), predict-zero baseline {:.2f}, {:.0f} s",
                            s.source_mae, kSupervisedMaxMae, r.baseline_mae, s.seconds)};
}

Outcome adaptation_trend(const AdaptationRuns& r) {
  if (!r.error.empty()) return {false, "training failed: " + r.error};
  std::vector<double> st, ft, ss, fs_;
  for (const auto& s : r.supervised) st.push_back(s.target_mae), ss.push_back(s.source_mae);
  for (const auto& s : r.full) ft.push_back(s.target_mae), fs_.push_back(s.source_mae);
  const double mt_sup = median(st), mt_all = median(ft), ms_sup = median(ss), ms_all = median(fs_);
  const bool pass = mt_all <= (1.0 - kTargetGain) * mt_sup && ms_all <= (1.0 + kSourceSlack) * ms_sup &&
                    r.seconds <= kAdaptationSeconds;
  return {pass, fmt::format("median target MAE {:.3f} vs supervised {:.3f} ({:+.1f}%); median source MAE "
                            "{:.3f} vs {:.3f} ({:+.1f}%); {:.1f} min",
                            mt_all, mt_sup, 100.0 * (mt_all / mt_sup - 1.0), ms_all, ms_sup,
                            100.0 * (ms_all / ms_sup - 1.0), r.seconds / 60.0)};
}

Outcome entropy_effect(const AdaptationRuns& r) {
  if (!r.error.empty()) return {false, "training failed: " + r.error};
  std::vector<double> start, end, sup;
  for (const auto& s : r.full) start.push_back(s.target_entropy_start), end.push_back(s.target_entropy_end);
  for (const auto& s : r.supervised) sup.push_back(s.target_entropy_end);
  const double m_start = median(start), m_end = median(end), m_sup = median(sup);
  return {m_end < m_start && m_end < m_sup,
          fmt::format("median target entropy {:.4f} at step 0, {:.4f} final with ent_tgt, {:.4f} supervised "
                      "final (per seed: {} / {})",
                      m_start, m_end, m_sup, join(end), join(sup))};
}

// ---- criterion 8 -----------------------------------------------------------

Outcome freeze_checks() {
  RunConfig cfg;
  cfg.model.backbone = {BackboneVariant::tiny, 8, 8, 3, 4};
  cfg.model.discriminator = {8, 2, 0.2f};
  cfg.train.weights.adv = 0.1;  // large enough that a leak would show
  TrainState state(cfg.model, cfg.train);
  std::mt19937_64 rng(8);
  auto scene = [&](Domain d) {
    SceneParams p;
    p.image_size = 32;
    p.count_min = 2;
    p.count_max = 4;
    Sample s = generate_scene(p, rng).sample;
    s.domain = d;
    if (d == Domain::target) s.points.reset();
    return s;
  };
  const std::vector<Sample> src{scene(Domain::source), scene(Domain::source)};
  const std::vector<Sample> tgt{scene(Domain::target), scene(Domain::target)};
  auto values = [](const std::vector<Parameter*>& ps) {
    std::vector<std::vector<float>> v;
    for (const Parameter* p : ps) v.push_back(p->value);
    return v;
  };
  auto grads = [](const std::vector<Parameter*>& ps) {
    std::vector<std::vector<float>> v;
    for (const Parameter* p : ps) v.push_back(p->grad);
    return v;
  };
  auto any_nonzero = [](const std::vector<std::vector<float>>& g) {
    for (const auto& v : g) {
      for (float x : v) {
        if (x != 0.0f) return true;
      }
    }
    return false;
  };
  std::vector<std::string> problems;
  for (int step = 0; step < 3; ++step) {
    state.disc.zero_grad();
    const auto disc_before = values(state.disc.parameters());
    DetachedPredictions detached;
    StepLog log = main_update(state, src, tgt, cfg.train, &detached);
    if (values(state.disc.parameters()) != disc_before) problems.push_back("main update moved the discriminator");
    if (any_nonzero(grads(state.disc.parameters()))) problems.push_back("adversarial loss left discriminator gradients");
    if (!any_nonzero(grads(state.main.parameters()))) problems.push_back("main network received no gradient");

    const auto main_before = values(state.main.parameters());
    const auto main_grads = grads(state.main.parameters());
    discriminator_update(state, detached, cfg.train, log);
    if (values(state.main.parameters()) != main_before) problems.push_back("discriminator update moved the main network");
    if (grads(state.main.parameters()) != main_grads) problems.push_back("discriminator objective reached main gradients");
    if (!any_nonzero(grads(state.disc.parameters()))) problems.push_back("discriminator received no gradient");
    if (values(state.disc.parameters()) == disc_before) problems.push_back("discriminator did not train");
  }
  return {problems.empty(), problems.empty() ? "3 alternating steps: parameters and gradients stay in their phase"
                                             : problems.front()};
}

// ---- criteria 9-10 (through the CLI binary) --------------------------------

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = fmt::format("{} {} >>{} 2>&1", POINTDA_CLI_PATH, args, log.string());
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string smoke_config() { return (fs::path(POINTDA_CONFIG_DIR) / "smoke.yaml").string(); }

Outcome determinism() {
  TempDir dir;
  const fs::path log = dir / "cli.log";
  const std::string cfg = smoke_config();
  const std::string data = (dir / "data").string();
  auto train = [&](const std::string& out, const std::string& extra) {
    return cli(fmt::format("train -c {} --data {} --out {} {}", cfg, data, (dir / out).string(), extra), log);
  };
  if (cli(fmt::format("generate-data -c {} --out {}", cfg, data), log) != 0) return {false, "generate-data failed"};
  if (train("a", "") != 0 || train("b", "") != 0) return {false, "train failed; see " + slurp(log)};
  if (train("r", "--stop-at 300") != 0 ||
      train("r", fmt::format("--resume {}", (dir / "r" / "checkpoint_last.bin").string())) != 0) {
    return {false, "interrupted/resumed train failed"};
  }
  std::vector<std::string> diffs;
  for (const char* f : {"metrics.csv", "losses.csv"}) {
    if (slurp(dir / "a" / f) != slurp(dir / "b" / f)) diffs.push_back(fmt::format("repeat {}", f));
    if (slurp(dir / "a" / f) != slurp(dir / "r" / f)) diffs.push_back(fmt::format("resumed {}", f));
  }
  if (slurp(dir / "a" / "checkpoint_last.bin") != slurp(dir / "r" / "checkpoint_last.bin")) {
    diffs.push_back("resumed checkpoint");
  }
  return {diffs.empty(), diffs.empty() ? "repeat and resumed (stop at 300 of 800) runs are byte-identical"
                                       : "differs: " + diffs.front()};
}

// Every metrics-like CSV with mae/mse columns: returns the number of records
// checked, or -1 if any has mae > mse.
int check_mae_mse(const fs::path& csv, int mae_col, int mse_col, std::string* bad) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  int n = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (static_cast<int>(f.size()) <= std::max(mae_col, mse_col)) continue;
    const double mae = std::stod(f[mae_col]), mse = std::stod(f[mse_col]);
    if (mae > mse + 1e-9) {
      *bad = fmt::format("{}: {}", csv.filename().string(), line);
      return -1;
    }
    ++n;
  }
  return n;
}

Outcome cli_pipeline() {
  TempDir dir;
  const fs::path log = dir / "cli.log";
  const std::string cfg = smoke_config();
  const std::string data = (dir / "data").string();
  const std::string ckpt = (dir / "train" / "checkpoint_best.bin").string();
  const std::vector<std::pair<std::string, std::string>> steps{
      {"generate-data", fmt::format("generate-data -c {} --out {}", cfg, data)},
      {"train", fmt::format("train -c {} --data {} --out {}", cfg, data, (dir / "train").string())},
      {"ablate", fmt::format("ablate -c {} --data {} --out {}", cfg, data, (dir / "ablate").string())},
      {"eval", fmt::format("eval --checkpoint {} --data {} --out {}", ckpt, data, (dir / "eval").string())},
      {"visualize", fmt::format("visualize --checkpoint {} --data {} --out {}", ckpt, data, (dir / "vis").string())},
  };
  for (const auto& [name, args] : steps) {
    if (const int code = cli(args, log); code != 0) {
      return {false, fmt::format("{} exited {}: {}", name, code, slurp(log))};
    }
  }
  // Ablation report: 6 rows with all four numbers present.
  std::ifstream report(dir / "ablate" / "ablation_report.csv");
  std::string line;
  std::getline(report, line);
  int rows = 0;
  while (std::getline(report, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() == 6 && f[5] == "ok" && !f[1].empty() && !f[2].empty() && !f[3].empty() && !f[4].empty()) ++rows;
  }
  if (rows != 6) return {false, fmt::format("ablation report has {} complete rows", rows)};

  std::string bad;
  int records = 0;
  std::vector<std::tuple<fs::path, int, int>> csvs{{dir / "ablate" / "ablation_report.csv", 1, 2},
                                                   {dir / "ablate" / "ablation_report.csv", 3, 4},
                                                   {dir / "train" / "metrics.csv", 4, 5},
                                                   {dir / "eval" / "metrics.csv", 4, 5},
                                                   {dir / "eval" / "threshold_sweep.csv", 3, 4}};
  for (const auto& [name, _] : ablation_configurations()) {
    std::string sub = name;
    std::replace(sub.begin(), sub.end(), '+', '_');
    csvs.emplace_back(dir / "ablate" / sub / "metrics.csv", 4, 5);
  }
  for (const auto& [csv, a, b] : csvs) {
    const int n = check_mae_mse(csv, a, b, &bad);
    if (n < 0) return {false, "mae > mse in " + bad};
    records += n;
  }
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dir / "vis")) pngs += e.path().extension() == ".png";
  return {pngs > 0, fmt::format("5 subcommands ok; ablation 6 rows; mae <= mse in {} records; {} PNGs", records, pngs)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  ::unsetenv("POINTDA_SEED");
  int failed = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << fmt::format("criterion {:>2} {}: {} ({})\n", id, o.pass ? "PASS" : "FAIL", name, o.detail)
              << std::flush;
    failed += o.pass ? 0 : 1;
  };
  report(1, "loss-formula oracles", loss_oracles());
  report(2, "loss gradient checks", gradient_checks());
  report(3, "matching vs brute force", matching_oracle());
  report(4, "geometry round trip", geometry_round_trip());
  std::cout << "training supervised and full-adaptation runs for criteria 5-7...\n" << std::flush;
  const AdaptationRuns runs = run_adaptation();
  report(5, "supervised sanity", supervised_sanity(runs));
  report(6, "adaptation trend", adaptation_trend(runs));
  report(7, "target entropy effect", entropy_effect(runs));
  report(8, "freeze/detach", freeze_checks());
  report(9, "determinism", determinism());
  report(10, "CLI pipeline", cli_pipeline());
  std::cout << fmt::format("{} of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}

/*
 * Copyright 2026 The csdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero if
// any criterion fails.
//
//   csdet_acceptance [work_dir]

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ap_oracle.hpp"
#include "csdet/detector.hpp"
#include "csdet/error.hpp"
#include "csdet/evaluator.hpp"
#include "csdet/experiment.hpp"
#include "csdet/losses.hpp"
#include "csdet/random.hpp"
#include "csdet/synthworld.hpp"
#include "csdet/taxonomy.hpp"
#include "csdet/trainer.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace csdet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

ModelParams random_params(Rng& rng, int dim, int leaves) {
  ModelParams p = ModelParams::zeros(dim, leaves);
  for (auto* b : p.blocks())
    for (double& w : b->weights) w = uniform(rng, -0.5, 0.5);
  return p;
}

bool bit_zero(const LinearBlock& b) {
  return std::all_of(b.weights.begin(), b.weights.end(),
                     [](double w) { return std::bit_cast<std::uint64_t>(w) == 0; });
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome aggregation_invariants() {
  const auto start = Clock::now();
  Rng rng(101);
  double worst = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 40));
    const auto edges = testing::random_tree_edges(rng, n);
    const Taxonomy tax = build_taxonomy(edges);
    std::vector<double> scores(tax.num_leaves());
    const double spread = uniform(rng, 0.1, 30);
    for (double& s : scores) s = uniform(rng, -spread, spread);
    const auto leaf = leaf_softmax(scores);
    const auto probs = aggregate(tax, leaf);
    double leaf_sum = 0;
    for (double p : leaf) leaf_sum += p;
    worst = std::max(worst, std::abs(leaf_sum - 1));
    worst = std::max(worst, std::abs(probs.values[tax.root()] - 1));
    for (Taxonomy::NodeId id = 0; id < tax.num_nodes(); ++id) {
      if (tax.is_leaf(id)) continue;
      double child_sum = 0;
      for (auto c : tax.children(id)) child_sum += probs.values[c];
      worst = std::max(worst, std::abs(probs.values[id] - child_sum));
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 10,
          std::to_string(trials) + " trees, max deviation " + fmt(worst) + ", " + fmt(secs, 3) +
              " s"};
}

Outcome gradient_oracle() {
  const auto start = Clock::now();
  Rng rng(202);
  double worst = 0;
  std::string where;
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 5;
    const ModelParams p = random_params(rng, dim, 4);
    const auto batch = testing::tiny_mixed_batch(rng, dim, 4);
    const auto r = testing::finite_difference_check(p, batch, LossConfig{});
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = r.worst;
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs < 30, "max relative error " + fmt(worst) +
                                          (where.empty() ? "" : " at " + where) + ", " +
                                          fmt(secs, 3) + " s"};
}

Outcome isolation() {
  bool ok = true;
  std::size_t samples = 0;

  // Synthetic image-level samples on a random model.
  Rng rng(303);
  const ModelParams p = random_params(rng, 7, 5);
  std::vector<Sample> batch;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> f(7);
    for (double& x : f) x = uniform(rng, -2, 2);
    batch.push_back({SampleKind::kImageCls, f, static_cast<int>(uniform_index(rng, 5)),
                     std::nullopt});
  }
  auto check = [&](const LossAndGrads& r) {
    ok = ok && bit_zero(r.grad.rpn_obj) && bit_zero(r.grad.rpn_reg) &&
         bit_zero(r.grad.head_obj) && bit_zero(r.grad.head_reg) && !bit_zero(r.grad.head_cls);
  };
  check(batch_loss_and_grads(p, batch));
  samples += batch.size();

  // Harvested samples from real image-level images through a random model.
  const WorldConfig wc = testing::small_world(0, 8, 0);
  const GeneratedWorld w = generate_dataset(wc);
  const Taxonomy tax = build_taxonomy(wc.taxonomy);
  const TrainConfig tc;
  const ModelParams q =
      random_params(rng, feature_dim(tc.detector.features), static_cast<int>(tax.num_leaves()));
  Batch b;
  for (std::size_t i = 0; i < w.train.images.size(); ++i) b.image_items.push_back({i, i % 2 == 1});
  const auto harvested = build_batch_samples(q, w.train, tax, b, tc, 99);
  if (harvested.empty()) return {false, "no image-level samples harvested"};
  check(batch_loss_and_grads(q, harvested, tc.loss));
  samples += harvested.size();

  return {ok, std::to_string(samples) +
                  " image-level samples; rpn_obj/rpn_reg/head_obj/head_reg gradients bit-zero"};
}

Outcome additivity(const fs::path& log_csv) {
  const auto log = read_log_csv(log_csv);
  double worst = 0;
  for (const auto& r : log) {
    const auto& l = r.loss;
    const double sum = l.l_csrpn_b + l.l_reg_b + l.l_obj_b + l.l_cls_b + l.l_cls_i;
    worst = std::max(worst, std::abs(l.l_cross - sum));
  }
  return {!log.empty() && worst <= 1e-12,
          std::to_string(log.size()) + " logged iterations, max |l_cross - sum| " + fmt(worst)};
}

Outcome ap_oracle() {
  const auto start = Clock::now();
  Rng rng(505);
  int mismatches = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    std::vector<ScoredDetection> dets;
    GtByImage gts;
    testing::random_ap_instance(rng, dets, gts);
    if (average_precision(dets, gts) != testing::brute_force_ap(dets, gts)) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10, std::to_string(trials) + " instances, " +
                                            std::to_string(mismatches) + " mismatches, " +
                                            fmt(secs, 3) + " s"};
}

Outcome proposal_trend(const EvalReport& report, double demo_secs) {
  bool ok = demo_secs <= 300;
  std::string detail;
  const char* names[] = {"all", "box_level", "image_level"};
  for (int s = 0; s < 3; ++s) {
    for (std::size_t i = 1; i < report.proposals.size(); ++i) {
      const auto& prev = report.proposals[i - 1];
      const auto& cur = report.proposals[i];
      if (!prev.ar[s] || !cur.ar[s] || !prev.ap[s] || !cur.ap[s]) {
        ok = false;
        detail += std::string(" missing ") + names[s];
        continue;
      }
      if (*cur.ar[s] < *prev.ar[s]) {
        ok = false;
        detail += std::string(" AR drop ") + names[s] + "@" + std::to_string(cur.count);
      }
      if (*cur.ap[s] > *prev.ap[s]) {
        ok = false;
        detail += std::string(" AP rise ") + names[s] + "@" + std::to_string(cur.count);
      }
    }
  }
  const auto& first = report.proposals.front();
  const auto& last = report.proposals.back();
  return {ok, "all: AP " + fmt(first.ap[0]) + " -> " + fmt(last.ap[0]) + ", AR " +
                  fmt(first.ar[0]) + " -> " + fmt(last.ar[0]) + "; demo " + fmt(demo_secs, 3) +
                  " s" + detail};
}

Outcome cross_supervision(const EvalReport& cross, std::uint64_t seed) {
  const WorldConfig wc = demo_world_config(seed);
  const GeneratedWorld world = generate_dataset(wc);
  const Taxonomy tax = build_taxonomy(wc.taxonomy);
  TrainConfig tc = demo_train_config(seed);
  tc.batch_img = 0;
  tc.batch_box = 8;
  const RunResult oracle = train_fully_supervised(world, tax, tc);
  const auto c = cross.map.image_level;
  const auto o = oracle.report.map.image_level;
  const bool ok = wc.box_level.size() == 6 && wc.image_level.size() == 6 && c && o &&
                  *c >= 0.25 && *c >= 0.5 * *o;
  return {ok, "image-level mAP " + fmt(c) + ", oracle " + fmt(o) +
                  (c && o && *o > 0 ? ", ratio " + fmt(*c / *o) : "")};
}

Outcome semantic_aggregation() {
  const std::vector<std::string> ancestors{"round", "pointy"};
  int wins = 0;
  std::string detail;
  const std::uint64_t seeds[] = {7, 8, 9};
  for (std::uint64_t seed : seeds) {
    const WorldConfig wc = with_ancestor_pools(demo_world_config(seed), ancestors);
    const GeneratedWorld world = generate_dataset(wc);
    const Taxonomy tax = build_taxonomy(wc.taxonomy);
    const TrainConfig tc = demo_train_config(seed);

    const RunResult sa = train_and_evaluate(world, tax, tc);

    std::vector<std::string> classes = tax.leaf_order();
    classes.insert(classes.end(), ancestors.begin(), ancestors.end());
    const Taxonomy flat = flat_taxonomy(classes);
    const TrainResult flat_train = train(world.train, flat, tc);
    EvalOptions eo;
    eo.detector = tc.detector;
    const EvalReport flat_report =
        evaluate(flat_train.params, flat, tax, world.eval, world.splits, eo);

    const auto a = sa.report.map.all;
    const auto f = flat_report.map.all;
    const bool win = a && f && *a >= *f;
    wins += win ? 1 : 0;
    detail += " seed " + std::to_string(seed) + ": " + fmt(a) + " vs " + fmt(f) + ";";
  }
  return {wins >= 2, "aggregated vs flat mAP," + detail + " " + std::to_string(wins) + "/3"};
}

Outcome determinism(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    const auto ext = rel.extension();
    if (ext != ".ckpt" && ext != ".csv") continue;
    if (!fs::exists(b / rel)) return {false, "missing " + rel.string()};
    if (read_bytes(entry.path()) != read_bytes(b / rel)) {
      return {false, "differs: " + rel.string()};
    }
    ++files;
  }
  return {files > 0, std::to_string(files) + " checkpoint/CSV files byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "csdet_accept";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::uint64_t seed = 7;

  int failures = 0;
  auto report = [&](int n, const std::string& name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << n << " " << name << ": " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << ")" << std::endl;
  };

  report(1, "aggregation invariants", aggregation_invariants);
  report(2, "gradient oracle", gradient_oracle);
  report(3, "cross-supervision isolation", isolation);

  std::ostringstream demo_log;
  const auto demo_start = Clock::now();
  std::optional<EvalReport> demo;
  try {
    demo = run_demo(seed, work / "run1", demo_log);
  } catch (const std::exception& e) {
    std::cout << "demo failed: " << e.what() << std::endl;
  }
  const double demo_secs = seconds_since(demo_start);

  auto need_demo = [&](const std::function<Outcome()>& run) {
    return [&, run]() -> Outcome {
      if (!demo) return {false, "demo run failed"};
      return run();
    };
  };

  report(4, "loss additivity", need_demo([&] { return additivity(work / "run1/train/log.csv"); }));
  report(5, "AP oracle equivalence", ap_oracle);
  report(6, "proposal AP/AR trend", need_demo([&] { return proposal_trend(*demo, demo_secs); }));
  report(7, "cross-supervision efficacy", need_demo([&] { return cross_supervision(*demo, seed); }));
  report(8, "semantic aggregation efficacy", semantic_aggregation);
  report(9, "determinism", need_demo([&] {
           std::ostringstream again;
           run_demo(seed, work / "run2", again);
           return determinism(work / "run1", work / "run2");
         }));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

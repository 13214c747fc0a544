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

#include <doctest.h>

#include <cmath>

#include "ap_oracle.hpp"
#include "binary_io.hpp"
#include "csdet/evaluator.hpp"
#include "test_util.hpp"

namespace csdet {
namespace {

using testing::error_code_of;

TEST_CASE("average precision examples") {
  const GtByImage one{{{0, 0, 10, 10}}};
  const std::vector<ScoredDetection> good{{0, {0, 0, 10, 9}, 0.7}};
  CHECK(average_precision(good, one) == 1.0);

  const std::vector<ScoredDetection> dup{{0, {0, 0, 10, 10}, 0.9}, {0, {0, 0, 10, 10}, 0.8}};
  CHECK(average_precision(dup, one) == 1.0);
  const auto m = greedy_match(dup, one);
  CHECK(m.tp == std::vector<bool>{true, false});

  const std::vector<ScoredDetection> fp_first{{0, {0, 0, 10, 10}, 0.8}, {0, {30, 30, 40, 40}, 0.9}};
  CHECK(average_precision(fp_first, one) == 0.5);

  CHECK(!average_precision(good, GtByImage{{}}).has_value());
  CHECK(average_precision({}, one) == 0.0);
  // Detections in an image without GT are false positives.
  const std::vector<ScoredDetection> wrong_image{{1, {0, 0, 10, 10}, 0.9}, {0, {0, 0, 10, 10}, 0.5}};
  CHECK(average_precision(wrong_image, GtByImage{{{0, 0, 10, 10}}, {}}) == 0.5);
}

TEST_CASE("greedy matching prefers the highest-IoU free box") {
  const GtByImage g{{{0, 0, 10, 10}, {2, 0, 12, 10}}};
  const std::vector<ScoredDetection> d{{0, {1, 0, 11, 10}, 0.9}, {0, {2, 0, 12, 10}, 0.8}};
  // The first detection overlaps both boxes equally and takes box 0.
  const auto m = greedy_match(d, g);
  CHECK(m.tp == std::vector<bool>{true, true});
  CHECK(average_precision(d, g) == 1.0);
}

TEST_CASE("greedy AP equals the brute-force assignment oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ScoredDetection> dets;
    GtByImage gts;
    testing::random_ap_instance(rng, dets, gts);
    const auto a = average_precision(dets, gts);
    const auto b = testing::brute_force_ap(dets, gts);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(*a == *b);
  }
}

TEST_CASE("AP properties") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoredDetection> dets;
    GtByImage gts;
    testing::random_ap_instance(rng, dets, gts);
    const auto ap = average_precision(dets, gts);
    if (!ap) continue;
    CHECK(*ap >= 0.0);
    CHECK(*ap <= 1.0);
    const auto m = greedy_match(dets, gts);
    std::size_t num_gt = 0;
    for (const auto& g : gts) num_gt += g.size();
    std::size_t tp_before_fp = 0;
    while (tp_before_fp < m.tp.size() && m.tp[tp_before_fp]) ++tp_before_fp;
    CHECK((*ap == 1.0) == (tp_before_fp == num_gt));

    std::vector<double> scores;
    for (std::size_t i : m.order) scores.push_back(dets[i].score);
    const auto pr = precision_recall(scores, m.tp, num_gt);
    for (std::size_t i = 0; i < pr.size(); ++i) {
      CHECK(pr[i].precision >= 0.0);
      CHECK(pr[i].precision <= 1.0);
      if (i > 0) {
        CHECK(pr[i].recall >= pr[i - 1].recall);
        CHECK(pr[i].score <= pr[i - 1].score);
      }
    }
  }
}

TEST_CASE("mean AP by split") {
  const SplitMap s{{"a", "b"}, {"c"}};
  auto m = mean_ap({{"a", 1.0}, {"b", 0.0}}, s);
  CHECK(m.all == 0.5);
  CHECK(m.box_level == 0.5);
  CHECK(!m.image_level.has_value());
  m = mean_ap({{"c", 0.25}}, s);
  CHECK(m.all == 0.25);
  CHECK(m.image_level == 0.25);
  m = mean_ap({{"a", 0.5}, {"b", std::nullopt}, {"c", 1.0}, {"zzz", 0.0}}, s);
  CHECK(m.all == 0.75);
  CHECK(m.box_level == 0.5);
  const SplitMap reordered{{"b", "a"}, {"c"}};
  CHECK(mean_ap({{"a", 0.3}, {"b", 0.6}, {"c", 0.1}}, reordered).all ==
        mean_ap({{"a", 0.3}, {"b", 0.6}, {"c", 0.1}}, s).all);
}

TEST_CASE("proposal table") {
  const std::vector<ProposalGt> gts{{{{0, 0, 10, 10}, {20, 20, 30, 30}}, {Split::kBoxLevel, Split::kImageLevel}},
                                    {{{5, 5, 15, 15}}, {Split::kBoxLevel}}};
  const std::vector<std::vector<Proposal>> perfect{
      {{{0, 0, 10, 10}, 0.9}, {{20, 20, 30, 30}, 0.8}, {{40, 40, 50, 50}, 0.1}},
      {{{5, 5, 15, 15}, 0.7}, {{30, 0, 40, 10}, 0.2}}};
  const std::vector<int> counts{1, 2, 3};
  const auto rows = proposal_table(perfect, gts, counts);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ar[0] == 2.0 / 3.0);
  CHECK(rows[1].ar == std::array<std::optional<double>, 3>{1.0, 1.0, 1.0});
  CHECK(rows[0].ap[0] == 2.0 / 3.0);
  CHECK(rows[1].ap[0] == 1.0);
  // Box-level column at K=2: the image-level hit (0.8) is ignored, not an FP.
  CHECK(rows[1].ap[1] == 1.0);
  // Trailing FPs below every TP leave AP unchanged.
  CHECK(rows[2].ap[0] == 1.0);

  const std::vector<ProposalGt> only_box{{{{0, 0, 10, 10}}, {Split::kBoxLevel}}};
  const std::vector<std::vector<Proposal>> p1{{{{0, 0, 10, 10}, 0.5}}};
  const std::vector<int> c1{1};
  const auto r1 = proposal_table(p1, only_box, c1);
  CHECK(!r1[0].ap[2].has_value());
  CHECK(!r1[0].ar[2].has_value());
}

TEST_CASE("proposal AR is monotone in the budget") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ProposalGt> gts(3);
    std::vector<std::vector<Proposal>> props(3);
    for (int i = 0; i < 3; ++i) {
      for (int g = 0; g < 3; ++g) {
        const double x = uniform(rng, 0, 40), y = uniform(rng, 0, 40);
        gts[i].boxes.push_back({x, y, x + 14, y + 14});
        gts[i].split.push_back(uniform01(rng) < 0.5 ? Split::kBoxLevel : Split::kImageLevel);
      }
      double score = 1.0;
      for (int k = 0; k < 40; ++k) {
        const double x = uniform(rng, 0, 40), y = uniform(rng, 0, 40);
        score *= uniform(rng, 0.8, 1.0);
        props[i].push_back({{x, y, x + uniform(rng, 10, 18), y + uniform(rng, 10, 18)}, score});
      }
    }
    const std::vector<int> counts{1, 2, 5, 10, 20, 40};
    const auto rows = proposal_table(props, gts, counts);
    for (std::size_t r = 1; r < rows.size(); ++r)
      for (int c = 0; c < 3; ++c)
        if (rows[r].ar[c]) CHECK(*rows[r].ar[c] >= *rows[r - 1].ar[c]);
  }
}

EvalReport sample_report() {
  EvalReport r;
  r.per_category = {{"circle_red", Split::kBoxLevel, 12, 0.75},
                    {"square_blue", Split::kImageLevel, 0, std::nullopt}};
  r.map = {0.75, 0.75, std::nullopt};
  ProposalRow row;
  row.count = 10;
  row.ap = {0.1, 0.2, std::nullopt};
  row.ar = {0.5, 1.0 / 3.0, std::nullopt};
  r.proposals = {row};
  return r;
}

TEST_CASE("report files") {
  const auto d1 = testing::scratch_dir("report_a"), d2 = testing::scratch_dir("report_b");
  const EvalReport r = sample_report();
  write_report(r, d1);
  write_report(r, d2);
  for (const char* f : {"per_category_ap.csv", "summary.csv", "proposal_table.csv"}) {
    CHECK(read_file(d1 / f) == read_file(d2 / f));
  }
  const std::string table = read_file(d1 / "proposal_table.csv");
  CHECK(table ==
        "proposals,ap_all,ap_box_level,ap_image_level,ar_all,ar_box_level,ar_image_level\n"
        "10,0.1,0.2,NA,0.5,0.3333333333333333,NA\n");
  const EvalReport back = load_report(d1);
  CHECK(back.per_category == r.per_category);
  CHECK(back.map.all == r.map.all);
  CHECK(!back.map.image_level.has_value());
  CHECK(back.proposals[0].ar == r.proposals[0].ar);
  CHECK(back.proposals[0].ap == r.proposals[0].ap);
  CHECK(read_file(d1 / "summary.csv").find("mAP_image_level,NA\n") != std::string::npos);

  write_file(d1 / "summary.csv", "bad header\n");
  CHECK(error_code_of([&] { load_report(d1); }) == ErrorCode::kFormatError);
  CHECK(!format_report(r).empty());
}

TEST_CASE("evaluate a zero model") {
  const WorldConfig wc = testing::small_world(0, 0, 6);
  WorldConfig c = wc;
  c.train_box_images = 0;
  c.train_image_images = 0;
  const GeneratedWorld w = generate_dataset(c);
  const Taxonomy t = build_taxonomy(c.taxonomy);
  const ModelParams p = ModelParams::zeros(25, 12);
  const EvalReport r = evaluate(p, t, t, w.eval, w.splits);
  CHECK(r.per_category.size() == 12);
  CHECK(r.proposals.size() == kDefaultProposalCounts.size());
  for (const auto& c : r.per_category) {
    if (c.num_gt == 0) CHECK(!c.ap.has_value());
    if (c.ap) {
      CHECK(*c.ap >= 0.0);
      CHECK(*c.ap <= 1.0);
    }
  }
  REQUIRE(r.map.all.has_value());
  EvalOptions bad;
  bad.proposal_counts = {20, 10};
  CHECK(error_code_of([&] { evaluate(p, t, t, w.eval, w.splits, bad); }) == ErrorCode::kConfigInvalid);
  bad.proposal_counts = {};
  CHECK(error_code_of([&] { evaluate(p, t, t, w.eval, w.splits, bad); }) == ErrorCode::kConfigInvalid);
}

TEST_CASE("ancestor categories are scored against descendant leaves") {
  WorldConfig c = testing::small_world(0, 0, 6);
  c.image_level.push_back("round");
  const GeneratedWorld w = generate_dataset(c);
  const Taxonomy t = build_taxonomy(c.taxonomy);
  const EvalReport r = evaluate(ModelParams::zeros(25, 12), t, t, w.eval, w.splits);
  std::size_t round_leaves = 0, round_gt = 0;
  for (const auto& img : w.eval.images)
    for (const auto& a : img.boxes) round_leaves += a.category.rfind("circle_", 0) == 0;
  for (const auto& x : r.per_category)
    if (x.category == "round") round_gt = x.num_gt;
  CHECK(round_gt == round_leaves);
}

}  // namespace
}  // namespace csdet

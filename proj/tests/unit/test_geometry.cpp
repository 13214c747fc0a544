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

#include "csdet/geometry.hpp"
#include "csdet/random.hpp"
#include "test_util.hpp"

namespace csdet {
namespace {

// IoU of integer boxes by counting unit cells.
double iou_by_counting(const Box& a, const Box& b) {
  int inter = 0, uni = 0;
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) {
      const bool in_a = x >= a.x1 && x + 1 <= a.x2 && y >= a.y1 && y + 1 <= a.y2;
      const bool in_b = x >= b.x1 && x + 1 <= b.x2 && y >= b.y1 && y + 1 <= b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

Box random_int_box(Rng& rng) {
  const int x1 = uniform_int(rng, 0, 30), y1 = uniform_int(rng, 0, 30);
  return {double(x1), double(y1), double(x1 + uniform_int(rng, 1, 9)),
          double(y1 + uniform_int(rng, 1, 9))};
}

TEST_CASE("iou examples") {
  const Box a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, {10, 0, 20, 10}) == 0.0);
  CHECK(std::abs(iou(a, {5, 5, 15, 15}) - 25.0 / 175.0) < 1e-15);
}

TEST_CASE("iou agrees with cell counting") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const Box a = random_int_box(rng), b = random_int_box(rng);
    const double v = iou(a, b);
    CHECK(std::abs(v - iou_by_counting(a, b)) < 1e-12);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("anchor generation") {
  const std::vector<double> s16{16}, r1{1};
  auto a = generate_anchors(64, 64, 16, s16, r1);
  CHECK(a.size() == 16);
  for (const auto& b : a) {
    CHECK(b.width() == 16);
    CHECK(b.height() == 16);
  }
  const std::vector<double> s2{16, 32}, r2{1, 2};
  a = generate_anchors(64, 64, 16, s2, r2);
  CHECK(a.size() == 64);
  for (const auto& b : a) {
    CHECK(b.x1 >= 0);
    CHECK(b.y1 >= 0);
    CHECK(b.x2 <= 64);
    CHECK(b.y2 <= 64);
  }
  // Corner anchor of scale 32 spills past the border before clipping.
  CHECK(a[2].x1 == 0);
  const std::vector<double> none;
  CHECK(testing::error_code_of([&] { generate_anchors(64, 64, 16, none, r1); }) ==
        ErrorCode::kEmptyConfig);
  CHECK(testing::error_code_of([&] { generate_anchors(64, 64, 16, s16, none); }) ==
        ErrorCode::kEmptyConfig);
}

TEST_CASE("anchor labels") {
  const std::vector<Box> anchors{{0, 0, 10, 8}, {0, 0, 10, 5}, {0, 0, 10, 1}};
  const std::vector<Box> gt{{0, 0, 10, 10}};
  const auto none = assign_anchor_labels(anchors, {});
  for (const auto& x : none) CHECK(x.label == AnchorLabel::kNegative);

  const auto r = assign_anchor_labels(anchors, gt, 0.7, 0.3);
  CHECK(r[0].label == AnchorLabel::kPositive);
  CHECK(r[1].label == AnchorLabel::kIgnore);
  CHECK(r[2].label == AnchorLabel::kNegative);

  const std::vector<Box> same{{2, 3, 12, 9}};
  const auto s = assign_anchor_labels(same, same);
  CHECK(s[0].label == AnchorLabel::kPositive);
  CHECK(*s[0].target_delta == BoxDelta{0, 0, 0, 0});

  // A GT whose best anchor is below the threshold still gets that anchor.
  const std::vector<Box> weak{{0, 0, 10, 10}, {30, 30, 40, 40}};
  const std::vector<Box> far{{0, 0, 10, 4}};
  const auto w = assign_anchor_labels(weak, far);
  CHECK(w[0].label == AnchorLabel::kPositive);
  CHECK(w[1].label == AnchorLabel::kNegative);
}

TEST_CASE("delta encoding") {
  const Box anchor{0, 0, 10, 10};
  CHECK(encode_delta(anchor, anchor) == BoxDelta{0, 0, 0, 0});
  const auto d = encode_delta(anchor, {0, 0, 20, 20});
  CHECK(d.tx == 0.5);
  CHECK(d.ty == 0.5);
  CHECK(std::abs(d.tw - std::log(2.0)) < 1e-15);
  CHECK(std::abs(d.th - std::log(2.0)) < 1e-15);

  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Box a = random_int_box(rng);
    const Box g{uniform(rng, 0, 20), uniform(rng, 0, 20), uniform(rng, 21, 40),
                uniform(rng, 21, 40)};
    const Box back = decode_delta(a, encode_delta(a, g));
    CHECK(std::abs(back.x1 - g.x1) < 1e-9);
    CHECK(std::abs(back.y1 - g.y1) < 1e-9);
    CHECK(std::abs(back.x2 - g.x2) < 1e-9);
    CHECK(std::abs(back.y2 - g.y2) < 1e-9);
  }
}

TEST_CASE("nms examples") {
  std::vector<ScoredBox> one{{{0, 0, 5, 5}, 0.3}};
  CHECK(nms(one, 0.5) == std::vector<std::size_t>{0});
  std::vector<ScoredBox> dup{{{0, 0, 5, 5}, 0.8}, {{0, 0, 5, 5}, 0.9}};
  CHECK(nms(dup, 0.5) == std::vector<std::size_t>{1});
  std::vector<ScoredBox> abc{{{0, 0, 10, 10}, 0.9}, {{0, 0, 10, 6}, 0.8}, {{20, 20, 30, 30}, 0.7}};
  CHECK(std::abs(iou(abc[0].box, abc[1].box) - 0.6) < 1e-15);
  CHECK(nms(abc, 0.5) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("nms output characterization") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredBox> boxes;
    const int n = uniform_int(rng, 0, 15);
    for (int i = 0; i < n; ++i) boxes.push_back({random_int_box(rng), uniform01(rng)});
    const double thresh = uniform(rng, 0.1, 0.9);
    const auto kept = nms(boxes, thresh);
    std::vector<bool> is_kept(boxes.size(), false);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      is_kept[kept[i]] = true;
      if (i > 0) CHECK(boxes[kept[i - 1]].score >= boxes[kept[i]].score);
      for (std::size_t j = 0; j < i; ++j) CHECK(iou(boxes[kept[i]].box, boxes[kept[j]].box) <= thresh);
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (is_kept[i]) continue;
      bool covered = false;
      for (std::size_t k : kept) {
        const bool earlier = boxes[k].score > boxes[i].score ||
                             (boxes[k].score == boxes[i].score && k < i);
        covered = covered || (earlier && iou(boxes[k].box, boxes[i].box) > thresh);
      }
      CHECK(covered);
    }
  }
}

TEST_CASE("horizontal flip") {
  Raster img(8, 64, 3);
  Rng rng(2);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(uniform01(rng));
  const std::vector<Box> boxes{{0, 0, 10, 20}, {22, 1, 42, 7}};
  const auto [once, fb] = horizontal_flip(img, boxes);
  CHECK(fb[0] == Box{54, 0, 64, 20});
  CHECK(fb[1] == boxes[1]);
  CHECK(once.at(3, 63, 1) == img.at(3, 0, 1));
  const auto [twice, bb] = horizontal_flip(once, fb);
  CHECK(twice == img);
  CHECK(bb == boxes);
}

}  // namespace
}  // namespace csdet

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

// Axis-aligned box arithmetic.
//
// Boxes use continuous corner coordinates. A pixel (row r, column c) covers
// [c, c+1) x [r, r+1), so area is (x2 - x1) * (y2 - y1) with no +1 terms.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "csdet/raster.hpp"

namespace csdet {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool valid() const;

  bool operator==(const Box&) const = default;
};

struct BoxDelta {
  double tx = 0, ty = 0, tw = 0, th = 0;

  bool operator==(const BoxDelta&) const = default;
};

double iou(const Box& a, const Box& b);

Box clip_box(const Box& box, double width, double height);

// One anchor per (grid cell, scale, ratio), row-major over cells, then
// scale, then ratio. `ratio` is height / width at constant area scale^2.
// Anchors are clipped to the image. Throws kEmptyConfig.
std::vector<Box> generate_anchors(int image_width, int image_height, int stride,
                                  std::span<const double> scales,
                                  std::span<const double> ratios);

enum class AnchorLabel { kPositive, kNegative, kIgnore };

struct AnchorAssignment {
  AnchorLabel label = AnchorLabel::kNegative;
  std::optional<std::size_t> matched_gt;
  std::optional<BoxDelta> target_delta;
};

inline constexpr double kDefaultPositiveIou = 0.7;
inline constexpr double kDefaultNegativeIou = 0.3;

// Positive when IoU >= pos_thresh with some GT, or when the anchor is the
// first argmax anchor of a GT it overlaps; negative when max IoU <= neg_thresh;
// ignored otherwise.
std::vector<AnchorAssignment> assign_anchor_labels(
    std::span<const Box> anchors, std::span<const Box> gt_boxes,
    double pos_thresh = kDefaultPositiveIou,
    double neg_thresh = kDefaultNegativeIou);

BoxDelta encode_delta(const Box& anchor, const Box& gt);
Box decode_delta(const Box& anchor, const BoxDelta& delta);

struct ScoredBox {
  Box box;
  double score = 0;
};

// Greedy suppression. Returns indices into `boxes` in descending score order,
// ties resolved by input order. A box is dropped when its IoU with an
// already kept box exceeds `iou_thresh`.
std::vector<std::size_t> nms(std::span<const ScoredBox> boxes, double iou_thresh);

Box flip_box(const Box& box, double image_width);

// Mirrors pixel columns and maps (x1, x2) -> (W - x2, W - x1).
std::pair<Raster, std::vector<Box>> horizontal_flip(const Raster& image,
                                                    std::span<const Box> boxes);

}  // namespace csdet

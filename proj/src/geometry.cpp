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

#include "csdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csdet/error.hpp"

namespace csdet {

bool Box::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x1 < x2 && y1 < y2;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Box clip_box(const Box& box, double width, double height) {
  return {std::clamp(box.x1, 0.0, width), std::clamp(box.y1, 0.0, height),
          std::clamp(box.x2, 0.0, width), std::clamp(box.y2, 0.0, height)};
}

std::vector<Box> generate_anchors(int image_width, int image_height, int stride,
                                  std::span<const double> scales,
                                  std::span<const double> ratios) {
  if (scales.empty() || ratios.empty()) {
    throw Error(ErrorCode::kEmptyConfig, "anchor scales and ratios must be nonempty");
  }
  if (stride <= 0 || image_width < stride || image_height < stride) {
    throw Error(ErrorCode::kEmptyConfig, "stride does not tile the image");
  }
  const int cols = image_width / stride;
  const int rows = image_height / stride;
  std::vector<Box> anchors;
  anchors.reserve(static_cast<std::size_t>(rows) * cols * scales.size() * ratios.size());
  for (int gy = 0; gy < rows; ++gy) {
    for (int gx = 0; gx < cols; ++gx) {
      const double cx = (gx + 0.5) * stride;
      const double cy = (gy + 0.5) * stride;
      for (double s : scales) {
        for (double r : ratios) {
          const double w = s / std::sqrt(r);
          const double h = s * std::sqrt(r);
          anchors.push_back(clip_box({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h},
                                     image_width, image_height));
        }
      }
    }
  }
  return anchors;
}

std::vector<AnchorAssignment> assign_anchor_labels(std::span<const Box> anchors,
                                                   std::span<const Box> gt_boxes,
                                                   double pos_thresh, double neg_thresh) {
  std::vector<AnchorAssignment> out(anchors.size());
  if (gt_boxes.empty()) return out;

  std::vector<double> best_iou(anchors.size(), 0.0);
  std::vector<std::size_t> best_gt(anchors.size(), 0);
  std::vector<double> gt_best_iou(gt_boxes.size(), 0.0);
  std::vector<std::size_t> gt_best_anchor(gt_boxes.size(), 0);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      const double v = iou(anchors[a], gt_boxes[g]);
      if (v > best_iou[a]) {
        best_iou[a] = v;
        best_gt[a] = g;
      }
      if (v > gt_best_iou[g]) {
        gt_best_iou[g] = v;
        gt_best_anchor[g] = a;
      }
    }
  }

  auto make_positive = [&](std::size_t a, std::size_t g) {
    out[a].label = AnchorLabel::kPositive;
    out[a].matched_gt = g;
    out[a].target_delta = encode_delta(anchors[a], gt_boxes[g]);
  };

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (best_iou[a] >= pos_thresh && best_iou[a] > 0) {
      make_positive(a, best_gt[a]);
    } else if (best_iou[a] <= neg_thresh) {
      out[a].label = AnchorLabel::kNegative;
    } else {
      out[a].label = AnchorLabel::kIgnore;
    }
  }
  for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
    if (gt_best_iou[g] <= 0) continue;
    const std::size_t a = gt_best_anchor[g];
    if (out[a].label != AnchorLabel::kPositive) make_positive(a, g);
  }
  return out;
}

BoxDelta encode_delta(const Box& anchor, const Box& gt) {
  const double aw = anchor.width(), ah = anchor.height();
  return {(gt.center_x() - anchor.center_x()) / aw,
          (gt.center_y() - anchor.center_y()) / ah, std::log(gt.width() / aw),
          std::log(gt.height() / ah)};
}

Box decode_delta(const Box& anchor, const BoxDelta& d) {
  const double aw = anchor.width(), ah = anchor.height();
  const double cx = anchor.center_x() + d.tx * aw;
  const double cy = anchor.center_y() + d.ty * ah;
  const double w = aw * std::exp(d.tw);
  const double h = ah * std::exp(d.th);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::vector<std::size_t> nms(std::span<const ScoredBox> boxes, double iou_thresh) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (iou(boxes[idx].box, boxes[k].box) > iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(idx);
  }
  return kept;
}

Box flip_box(const Box& box, double image_width) {
  return {image_width - box.x2, box.y1, image_width - box.x1, box.y2};
}

std::pair<Raster, std::vector<Box>> horizontal_flip(const Raster& image,
                                                    std::span<const Box> boxes) {
  Raster out(image.height(), image.width(), image.channels());
  const int w = image.width();
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        out.at(y, w - 1 - x, c) = image.at(y, x, c);
      }
    }
  }
  std::vector<Box> flipped;
  flipped.reserve(boxes.size());
  for (const Box& b : boxes) flipped.push_back(flip_box(b, w));
  return {std::move(out), std::move(flipped)};
}

}  // namespace csdet

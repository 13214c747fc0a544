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

// Cross-supervised training loss.
//
// The total is the sum of five terms, each averaged over its own samples:
//
//   l_csrpn_b  anchor CE + smooth L1 on positive anchors   (box-level data)
//   l_reg_b    head box regression                          (box-level data)
//   l_obj_b    head objectness CE                           (box-level data)
//   l_cls_b    leaf classification CE                       (box-level data)
//   l_cls_i    leaf classification CE on harvested proposals (image-level data)
//
// Routing is structural: a sample's kind decides the single parameter block it
// can reach, so image-level samples never touch the RPN or detection branch.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "csdet/detector.hpp"
#include "csdet/geometry.hpp"

namespace csdet {

enum class SampleKind { kBoxRpn, kBoxReg, kBoxObj, kBoxCls, kImageCls };

// Label value for a classification sample whose category is not a leaf.
inline constexpr int kAncestorLabel = -1;

struct Sample {
  SampleKind kind = SampleKind::kBoxCls;
  std::vector<double> features;
  // kBoxRpn/kBoxObj: 1 object, 0 background. kBoxCls/kImageCls: leaf index.
  int label = 0;
  // kBoxRpn positives and kBoxReg samples.
  std::optional<BoxDelta> target;

  bool operator==(const Sample&) const = default;
};

struct LossBreakdown {
  double l_csrpn_b = 0;
  double l_reg_b = 0;
  double l_obj_b = 0;
  double l_cls_b = 0;
  double l_cls_i = 0;
  double l_cross = 0;
};

struct LossWeights {
  double csrpn_b = 1.0;
  double reg_b = 1.0;
  double obj_b = 1.0;
  double cls_b = 1.0;
  double cls_i = 1.0;
};

struct LossConfig {
  LossWeights weights;
  double smooth_l1_beta = 1.0;
};

struct SoftmaxCeResult {
  double loss = 0;
  std::vector<double> grad;
};

// -ln softmax(scores)[label] and its gradient p - onehot. Throws
// kLabelOutOfRange.
SoftmaxCeResult softmax_ce(std::span<const double> scores, int label);

struct SmoothL1Result {
  double loss = 0;
  BoxDelta grad;
};

SmoothL1Result smooth_l1(const BoxDelta& pred, const BoxDelta& target, double beta = 1.0);

struct LossAndGrads {
  LossBreakdown loss;
  ModelParams grad;
};

// Throws kEmptyBatch, kUnfilteredAncestorLabel, kLabelOutOfRange or
// kDimMismatch.
LossAndGrads batch_loss_and_grads(const ModelParams& params, std::span<const Sample> batch,
                                  const LossConfig& config = {});

}  // namespace csdet

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

// Two-stage detector with linear heads over region features.
//
// Stage one (the cross-supervised RPN) scores and regresses anchors. Stage two
// is decoupled: a category-agnostic detection branch (objectness and box
// regression) and a classification branch that scores leaf categories only.
// Ancestor probabilities come from summing leaf probabilities.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csdet/featurizer.hpp"
#include "csdet/geometry.hpp"
#include "csdet/raster.hpp"
#include "csdet/taxonomy.hpp"

namespace csdet {

// y = W x + b with W stored row-major as `out` rows of `in` weights followed
// by the bias.
struct LinearBlock {
  int out = 0;
  int in = 0;
  std::vector<double> weights;

  static LinearBlock zeros(int out, int in);

  double& weight(int o, int i) { return weights[static_cast<std::size_t>(o) * (in + 1) + i]; }
  double weight(int o, int i) const {
    return weights[static_cast<std::size_t>(o) * (in + 1) + i];
  }
  double& bias(int o) { return weight(o, in); }
  double bias(int o) const { return weight(o, in); }

  void forward(std::span<const double> x, std::span<double> y) const;
  // grad += scale * g x^T (and scale * g for the bias).
  void accumulate(std::span<const double> x, std::span<const double> g, double scale);

  bool operator==(const LinearBlock&) const = default;
};

struct ModelParams {
  LinearBlock rpn_obj;   // 2 scores: background, object
  LinearBlock rpn_reg;   // 4 deltas
  LinearBlock head_obj;  // 2 scores: background, object
  LinearBlock head_reg;  // 4 deltas
  LinearBlock head_cls;  // one score per leaf

  static ModelParams zeros(int feature_dim, int num_leaves);

  int feature_dim() const { return rpn_obj.in; }
  int num_leaves() const { return head_cls.out; }

  // Blocks in checkpoint order.
  std::array<LinearBlock*, 5> blocks() {
    return {&rpn_obj, &rpn_reg, &head_obj, &head_reg, &head_cls};
  }
  std::array<const LinearBlock*, 5> blocks() const {
    return {&rpn_obj, &rpn_reg, &head_obj, &head_reg, &head_cls};
  }

  bool operator==(const ModelParams&) const = default;
};

inline constexpr int kObjectClass = 1;

struct DetectorConfig {
  FeatureConfig features;
  int anchor_stride = 8;
  std::vector<double> anchor_scales{12.0, 18.0, 26.0};
  std::vector<double> anchor_ratios{0.5, 1.0, 2.0};
  double proposal_nms = 0.7;
  double detection_nms = 0.5;
  double score_floor = 1e-3;
  // Proposals below this objectness are dropped; 0 keeps everything.
  double min_objectness = 0.0;

  std::vector<Box> anchors(int width, int height) const {
    return generate_anchors(width, height, anchor_stride, anchor_scales, anchor_ratios);
  }
};

// tw/th are clamped before exponentiation so wild early predictions cannot
// overflow.
inline constexpr double kMaxLogScale = 4.135166556742356;  // ln(1000 / 16)
Box apply_delta(const Box& anchor, BoxDelta delta, int width, int height);

struct AnchorOutput {
  std::array<double, 2> scores{0.0, 0.0};
  BoxDelta delta;
  double objectness = 0.5;
  // False when the anchor covers no pixel; such anchors are ignored.
  bool valid = true;
};

std::vector<AnchorOutput> rpn_forward(const ModelParams& params, const Raster& raster,
                                      std::span<const Box> anchors,
                                      const FeatureConfig& features);

struct Proposal {
  Box box;
  double objectness = 0;
};

// Decoded, clipped, NMS-deduplicated anchors sorted by objectness and
// truncated to k. The result for k is a prefix of the result for any k' > k.
std::vector<Proposal> propose(const ModelParams& params, const Raster& raster, int k,
                              const DetectorConfig& config);

struct ClassificationSample {
  Proposal proposal;
  std::string category;
  // Always true: these samples only ever train the classification branch.
  bool classification_only = true;
};

// Labels every proposal with the image's category. Throws kUnknownCategory.
std::vector<ClassificationSample> label_imagelevel_proposals(
    std::span<const Proposal> proposals, const std::string& image_category,
    const Taxonomy& taxonomy);

struct Detection {
  Box box;
  std::string category;
  double score = 0;
};

enum class ReportNodes { kLeafOnly, kAllNodes };

// Per-proposal head outputs before per-category selection.
struct ScoredRegion {
  Box box;             // proposal refined by the regression head
  double objectness;   // head objectness
  CategoryProbabilities probs;
};

// Throws kDimMismatch.
std::vector<ScoredRegion> score_proposals(const ModelParams& params, const Taxonomy& taxonomy,
                                          const Raster& raster, int k,
                                          const DetectorConfig& config);

// score = objectness * P(category), floor-filtered, then NMS per category.
std::vector<Detection> detect(const ModelParams& params, const Taxonomy& taxonomy,
                              const Raster& raster, int k = 300,
                              ReportNodes report = ReportNodes::kLeafOnly,
                              const DetectorConfig& config = {});

// Header: magic "CSCK", u32 version, u32 feature_dim, u32 leaf count, leaf
// names (u32 length + UTF-8 bytes), then the five blocks as little-endian f64
// in checkpoint order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ModelParams& params, const Taxonomy& taxonomy);
void save_checkpoint(const ModelParams& params, const Taxonomy& taxonomy,
                     const std::filesystem::path& path);
// Throws kFormatError, or kDimMismatch when the stored leaf order does not
// match `taxonomy`.
ModelParams load_checkpoint(const std::filesystem::path& path, const Taxonomy& taxonomy);

}  // namespace csdet

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

// mAP@0.5 with all-point interpolation, split reporting, and proposal AP/AR
// over a range of proposal budgets.

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csdet/detector.hpp"
#include "csdet/geometry.hpp"
#include "csdet/synthworld.hpp"
#include "csdet/taxonomy.hpp"

namespace csdet {

inline constexpr double kEvalIou = 0.5;

struct ScoredDetection {
  std::size_t image = 0;
  Box box;
  double score = 0;
};

// Ground-truth boxes of one category, indexed by image.
using GtByImage = std::vector<std::vector<Box>>;

// Sorts by descending score (stable) and matches each detection to the
// highest-IoU unmatched GT of its image with IoU >= iou_thresh. Returns the
// TP flag of each detection in ranked order, plus the ranking itself.
struct MatchResult {
  std::vector<std::size_t> order;
  std::vector<bool> tp;
};
MatchResult greedy_match(std::span<const ScoredDetection> detections, const GtByImage& gts,
                         double iou_thresh = kEvalIou);

struct PRPoint {
  double score = 0;
  double precision = 0;
  double recall = 0;
};

// One point per ranked detection.
std::vector<PRPoint> precision_recall(std::span<const double> ranked_scores,
                                      const std::vector<bool>& tp, std::size_t num_gt);

// Area under the precision envelope, all-point interpolation.
double ap_from_ranked_flags(const std::vector<bool>& tp, std::size_t num_gt);

// nullopt when the category has no GT instance.
std::optional<double> average_precision(std::span<const ScoredDetection> detections,
                                        const GtByImage& gts, double iou_thresh = kEvalIou);

struct MeanAp {
  std::optional<double> all;
  std::optional<double> box_level;
  std::optional<double> image_level;
};

// Categories with nullopt AP or no split are skipped; an empty split is
// absent rather than zero.
MeanAp mean_ap(const std::map<std::string, std::optional<double>>& per_category,
               const SplitMap& splits);

inline const std::vector<int> kDefaultProposalCounts{10, 20, 50, 100, 200, 300};

// Columns in the order all, box-level, image-level.
struct ProposalRow {
  int count = 0;
  std::array<std::optional<double>, 3> ap;
  std::array<std::optional<double>, 3> ar;
};

// GT instances of the eval set, tagged with the split of their leaf.
struct ProposalGt {
  std::vector<Box> boxes;
  std::vector<Split> split;
};

// Proposal lists per image are ranked globally by objectness. For a split
// column, proposals that match no GT of that split but overlap a GT of the
// other split at IoU >= 0.5 are ignored rather than counted as FPs. AR is the
// fraction of GT boxes with some top-K proposal at IoU >= 0.5. `proposals`
// holds each image's longest list; shorter budgets use its prefixes.
std::vector<ProposalRow> proposal_table(const std::vector<std::vector<Proposal>>& proposals,
                                        const std::vector<ProposalGt>& gts,
                                        std::span<const int> counts);

struct CategoryAp {
  std::string category;
  Split split = Split::kBoxLevel;
  std::size_t num_gt = 0;
  std::optional<double> ap;

  bool operator==(const CategoryAp&) const = default;
};

struct EvalReport {
  std::vector<CategoryAp> per_category;
  MeanAp map;
  std::vector<ProposalRow> proposals;
};

struct EvalOptions {
  std::vector<int> proposal_counts = kDefaultProposalCounts;
  // Proposals scored per image at inference.
  int detection_proposals = 300;
  DetectorConfig detector;
};

// Evaluates every category of `splits`. Ground truth for a category is every
// eval box whose leaf lies under it in `gt_taxonomy`; the model's own
// taxonomy may differ (for example a flat one that scores ancestors
// directly). Throws kConfigInvalid if counts are empty or not ascending.
EvalReport evaluate(const ModelParams& params, const Taxonomy& model_taxonomy,
                    const Taxonomy& gt_taxonomy, const Dataset& eval, const SplitMap& splits,
                    const EvalOptions& options = {});

// per_category_ap.csv, summary.csv, proposal_table.csv. Throws kIoError.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport load_report(const std::filesystem::path& dir);

// Fixed-width summary for terminals.
std::string format_report(const EvalReport& report);

}  // namespace csdet

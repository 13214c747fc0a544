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

// Cross-supervised training loop.
//
// Each iteration binds box-level and image-level images in one batch.
// Box-level images yield anchor samples for the RPN and RoI samples for both
// head branches. Image-level images go through the current RPN; their top-K
// proposals are labeled with the image category and used only by the
// classification branch.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "csdet/detector.hpp"
#include "csdet/losses.hpp"
#include "csdet/synthworld.hpp"
#include "csdet/taxonomy.hpp"

namespace csdet {

struct TrainConfig {
  int batch_box = 4;
  int batch_img = 4;
  int k_imagelevel_proposals = 10;
  int warmup_iters = 50;
  double base_lr = 0.05;
  double lr_drop_factor = 10.0;
  int lr_drop_epoch = 3;
  int total_epochs = 4;
  std::uint64_t seed = 7;
  double momentum = 0.0;
  double flip_prob = 0.5;

  int rpn_samples_per_image = 64;
  double rpn_positive_fraction = 0.5;
  double rpn_positive_iou = kDefaultPositiveIou;
  double rpn_negative_iou = kDefaultNegativeIou;
  // Anchors at or above this IoU with a GT serve as extra head positives.
  double head_positive_iou = 0.5;
  int head_negatives_per_positive = 3;

  // Image-level images still occupy their batch slots but contribute no
  // samples. Used to check that they never influence the RPN or the
  // detection branch.
  bool image_level_noop = false;

  LossConfig loss;
  DetectorConfig detector;

  // Throws kConfigInvalid.
  void validate() const;
};

// Flat `key = value` lines, `#` comments. Keys are the field names above, plus
// loss weights (w_csrpn_b, w_reg_b, w_obj_b, w_cls_b, w_cls_i), smooth_l1_beta,
// and detector settings (feature_grid, anchor_stride, anchor_scales,
// anchor_ratios, proposal_nms, detection_nms, score_floor, min_objectness).
// Unknown keys raise kConfigInvalid.
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
std::string train_config_to_text(const TrainConfig& config);

// Linear warmup from base_lr / 10 to base_lr over warmup_iters, then constant;
// divided by lr_drop_factor from epoch lr_drop_epoch + 1 (1-based) onward.
double lr_schedule(std::int64_t iter, std::int64_t iters_per_epoch, const TrainConfig& config);

struct BatchItem {
  std::size_t image = 0;
  bool flip = false;

  bool operator==(const BatchItem&) const = default;
};

struct Batch {
  std::vector<BatchItem> box_items;
  std::vector<BatchItem> image_items;

  bool operator==(const Batch&) const = default;
};

// Both pools shuffled independently; the shorter pool cycles. Throws
// kEmptyPool when a pool with a nonzero per-batch count is empty.
std::vector<Batch> make_batches(const Dataset& dataset, const TrainConfig& config,
                                std::uint64_t epoch_seed);

struct LogRecord {
  std::int64_t iter = 0;
  int epoch = 1;
  double lr = 0;
  LossBreakdown loss;
};

struct TrainResult {
  ModelParams params;
  std::vector<LogRecord> log;
};

// Builds the samples of one batch. Exposed for tests.
std::vector<Sample> build_batch_samples(const ModelParams& params, const Dataset& dataset,
                                        const Taxonomy& taxonomy, const Batch& batch,
                                        const TrainConfig& config, std::uint64_t batch_seed);

using EpochCallback = std::function<void(int epoch, const ModelParams& params)>;

// Throws kNonFiniteLoss if the loss diverges.
TrainResult train(const Dataset& dataset, const Taxonomy& taxonomy, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void write_log_csv(const std::vector<LogRecord>& log, const std::filesystem::path& path);
std::vector<LogRecord> read_log_csv(const std::filesystem::path& path);

}  // namespace csdet

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

#include "csdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "csdet/error.hpp"
#include "csdet/parallel.hpp"
#include "csdet/random.hpp"
#include "csdet/text.hpp"

namespace csdet {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigInvalid, m); };
  if (batch_box < 0 || batch_img < 0 || batch_box + batch_img == 0) {
    fail("batch counts must be nonnegative and not both zero");
  }
  if (k_imagelevel_proposals < 1) fail("k_imagelevel_proposals must be positive");
  if (warmup_iters < 0) fail("warmup_iters must be nonnegative");
  if (!(base_lr > 0) || !(lr_drop_factor > 0)) fail("learning rates must be positive");
  if (total_epochs < 1) fail("total_epochs must be positive");
  if (lr_drop_epoch < 0 || lr_drop_epoch > total_epochs) {
    fail("lr_drop_epoch must lie in [0, total_epochs]");
  }
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
  if (!(flip_prob >= 0 && flip_prob <= 1)) fail("flip_prob must lie in [0, 1]");
  if (rpn_samples_per_image < 1) fail("rpn_samples_per_image must be positive");
  if (!(rpn_positive_fraction > 0 && rpn_positive_fraction <= 1)) {
    fail("rpn_positive_fraction must lie in (0, 1]");
  }
  if (!(rpn_negative_iou >= 0 && rpn_negative_iou <= rpn_positive_iou && rpn_positive_iou <= 1)) {
    fail("need 0 <= rpn_negative_iou <= rpn_positive_iou <= 1");
  }
  if (head_negatives_per_positive < 0) fail("head_negatives_per_positive must be nonnegative");
  if (!(loss.smooth_l1_beta > 0)) fail("smooth_l1_beta must be positive");
  detector.features.validate();
  if (detector.anchor_scales.empty() || detector.anchor_ratios.empty() ||
      detector.anchor_stride < 1) {
    fail("anchor configuration is empty");
  }
}

namespace {

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split(value, ',')) {
    auto v = parse_double(trim_view(part));
    if (!v) throw Error(ErrorCode::kConfigInvalid, key + ": bad number '" + part + "'");
    out.push_back(*v);
  }
  return out;
}

std::string join_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, TrainConfig c) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (trim_view(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "train config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw Error(ErrorCode::kConfigInvalid, where + ": expected key=value");
    const std::string key(trim_view(std::string_view(line).substr(0, eq)));
    const std::string value(trim_view(std::string_view(line).substr(eq + 1)));
    auto num = [&] {
      auto v = parse_double(value);
      if (!v) throw Error(ErrorCode::kConfigInvalid, where + ": '" + key + "' needs a number");
      return *v;
    };
    auto integer = [&] {
      const double v = num();
      if (v != std::floor(v)) {
        throw Error(ErrorCode::kConfigInvalid, where + ": '" + key + "' needs an integer");
      }
      return static_cast<int>(v);
    };
    if (key == "batch_box") c.batch_box = integer();
    else if (key == "batch_img") c.batch_img = integer();
    else if (key == "k_imagelevel_proposals") c.k_imagelevel_proposals = integer();
    else if (key == "warmup_iters") c.warmup_iters = integer();
    else if (key == "base_lr") c.base_lr = num();
    else if (key == "lr_drop_factor") c.lr_drop_factor = num();
    else if (key == "lr_drop_epoch") c.lr_drop_epoch = integer();
    else if (key == "total_epochs") c.total_epochs = integer();
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "momentum") c.momentum = num();
    else if (key == "flip_prob") c.flip_prob = num();
    else if (key == "rpn_samples_per_image") c.rpn_samples_per_image = integer();
    else if (key == "rpn_positive_fraction") c.rpn_positive_fraction = num();
    else if (key == "rpn_positive_iou") c.rpn_positive_iou = num();
    else if (key == "rpn_negative_iou") c.rpn_negative_iou = num();
    else if (key == "head_positive_iou") c.head_positive_iou = num();
    else if (key == "head_negatives_per_positive") c.head_negatives_per_positive = integer();
    else if (key == "image_level_noop") c.image_level_noop = integer() != 0;
    else if (key == "w_csrpn_b") c.loss.weights.csrpn_b = num();
    else if (key == "w_reg_b") c.loss.weights.reg_b = num();
    else if (key == "w_obj_b") c.loss.weights.obj_b = num();
    else if (key == "w_cls_b") c.loss.weights.cls_b = num();
    else if (key == "w_cls_i") c.loss.weights.cls_i = num();
    else if (key == "smooth_l1_beta") c.loss.smooth_l1_beta = num();
    else if (key == "feature_grid") c.detector.features.grid = integer();
    else if (key == "anchor_stride") c.detector.anchor_stride = integer();
    else if (key == "anchor_scales") c.detector.anchor_scales = parse_list(key, value);
    else if (key == "anchor_ratios") c.detector.anchor_ratios = parse_list(key, value);
    else if (key == "proposal_nms") c.detector.proposal_nms = num();
    else if (key == "detection_nms") c.detector.detection_nms = num();
    else if (key == "score_floor") c.detector.score_floor = num();
    else if (key == "min_objectness") c.detector.min_objectness = num();
    else throw Error(ErrorCode::kConfigInvalid, where + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  return parse_train_config(read_file(path), std::move(base));
}

std::string train_config_to_text(const TrainConfig& c) {
  std::ostringstream o;
  auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << "\n"; };
  auto d = [](double v) { return format_double(v); };
  kv("batch_box", std::to_string(c.batch_box));
  kv("batch_img", std::to_string(c.batch_img));
  kv("k_imagelevel_proposals", std::to_string(c.k_imagelevel_proposals));
  kv("warmup_iters", std::to_string(c.warmup_iters));
  kv("base_lr", d(c.base_lr));
  kv("lr_drop_factor", d(c.lr_drop_factor));
  kv("lr_drop_epoch", std::to_string(c.lr_drop_epoch));
  kv("total_epochs", std::to_string(c.total_epochs));
  kv("seed", std::to_string(c.seed));
  kv("momentum", d(c.momentum));
  kv("flip_prob", d(c.flip_prob));
  kv("rpn_samples_per_image", std::to_string(c.rpn_samples_per_image));
  kv("rpn_positive_fraction", d(c.rpn_positive_fraction));
  kv("rpn_positive_iou", d(c.rpn_positive_iou));
  kv("rpn_negative_iou", d(c.rpn_negative_iou));
  kv("head_positive_iou", d(c.head_positive_iou));
  kv("head_negatives_per_positive", std::to_string(c.head_negatives_per_positive));
  kv("image_level_noop", c.image_level_noop ? "1" : "0");
  kv("w_csrpn_b", d(c.loss.weights.csrpn_b));
  kv("w_reg_b", d(c.loss.weights.reg_b));
  kv("w_obj_b", d(c.loss.weights.obj_b));
  kv("w_cls_b", d(c.loss.weights.cls_b));
  kv("w_cls_i", d(c.loss.weights.cls_i));
  kv("smooth_l1_beta", d(c.loss.smooth_l1_beta));
  kv("feature_grid", std::to_string(c.detector.features.grid));
  kv("anchor_stride", std::to_string(c.detector.anchor_stride));
  kv("anchor_scales", join_list(c.detector.anchor_scales));
  kv("anchor_ratios", join_list(c.detector.anchor_ratios));
  kv("proposal_nms", d(c.detector.proposal_nms));
  kv("detection_nms", d(c.detector.detection_nms));
  kv("score_floor", d(c.detector.score_floor));
  kv("min_objectness", d(c.detector.min_objectness));
  return o.str();
}

double lr_schedule(std::int64_t iter, std::int64_t iters_per_epoch, const TrainConfig& c) {
  double lr = c.base_lr;
  if (iter < c.warmup_iters) {
    const double start = c.base_lr / 10.0;
    lr = start + (c.base_lr - start) * static_cast<double>(iter) / c.warmup_iters;
  }
  const std::int64_t epoch0 = iters_per_epoch > 0 ? iter / iters_per_epoch : 0;
  if (epoch0 >= c.lr_drop_epoch) lr /= c.lr_drop_factor;
  return lr;
}

std::vector<Batch> make_batches(const Dataset& dataset, const TrainConfig& config,
                                std::uint64_t epoch_seed) {
  std::vector<std::size_t> box_pool, image_pool;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    (dataset.images[i].supervision == Supervision::kBox ? box_pool : image_pool).push_back(i);
  }
  if (config.batch_box > 0 && box_pool.empty()) {
    throw Error(ErrorCode::kEmptyPool, "no box-level images");
  }
  if (config.batch_img > 0 && image_pool.empty()) {
    throw Error(ErrorCode::kEmptyPool, "no image-level images");
  }
  Rng rng(epoch_seed);
  shuffle<std::size_t>(box_pool, rng);
  shuffle<std::size_t>(image_pool, rng);

  auto batches_for = [](std::size_t pool, int per) -> std::size_t {
    return per > 0 ? (pool + per - 1) / per : 0;
  };
  const std::size_t n = std::max(batches_for(box_pool.size(), config.batch_box),
                                 batches_for(image_pool.size(), config.batch_img));
  std::vector<Batch> out(n);
  std::size_t bi = 0, ii = 0;
  for (auto& batch : out) {
    for (int k = 0; k < config.batch_box; ++k) {
      const bool flip = uniform01(rng) < config.flip_prob;
      batch.box_items.push_back({box_pool[bi++ % box_pool.size()], flip});
    }
    for (int k = 0; k < config.batch_img; ++k) {
      const bool flip = uniform01(rng) < config.flip_prob;
      batch.image_items.push_back({image_pool[ii++ % image_pool.size()], flip});
    }
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t n, Rng& rng) {
  if (items.size() > n) {
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(items[i], items[i + uniform_index(rng, items.size() - i)]);
    }
    items.resize(n);
  }
  return items;
}

struct ImageView {
  Raster raster;
  std::vector<Box> boxes;
};

ImageView view_of(const AnnotatedImage& img, bool flip) {
  std::vector<Box> boxes;
  for (const auto& a : img.boxes) boxes.push_back(a.box);
  if (!flip) return {img.raster, boxes};
  auto [r, b] = horizontal_flip(img.raster, boxes);
  return {std::move(r), std::move(b)};
}

std::vector<Sample> box_level_samples(const AnnotatedImage& img, bool flip,
                                      const Taxonomy& taxonomy, const TrainConfig& config,
                                      Rng& rng) {
  const auto view = view_of(img, flip);
  const auto& fc = config.detector.features;
  const auto anchors = config.detector.anchors(view.raster.width(), view.raster.height());
  const auto assign = assign_anchor_labels(anchors, view.boxes, config.rpn_positive_iou,
                                           config.rpn_negative_iou);

  std::vector<std::string> labels;
  for (const auto& a : img.boxes) labels.push_back(a.category);
  const auto filter = filter_ancestor_samples(labels, taxonomy);
  std::vector<int> leaf_of(img.boxes.size(), kAncestorLabel);
  for (std::size_t k : filter.kept) {
    leaf_of[k] = static_cast<int>(leaf_index(taxonomy, labels[k]));
  }

  std::vector<std::size_t> pos, neg;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (!covers_pixel(view.raster, anchors[a])) continue;
    if (assign[a].label == AnchorLabel::kPositive) pos.push_back(a);
    if (assign[a].label == AnchorLabel::kNegative) neg.push_back(a);
  }

  std::vector<Sample> out;
  auto features = [&](const Box& b) { return region_features(view.raster, b, fc); };

  // Anchor samples for the RPN.
  const auto max_pos = static_cast<std::size_t>(
      std::lround(config.rpn_samples_per_image * config.rpn_positive_fraction));
  const auto rpn_pos = sample_without_replacement(pos, max_pos, rng);
  const auto rpn_neg = sample_without_replacement(
      neg, static_cast<std::size_t>(config.rpn_samples_per_image) - rpn_pos.size(), rng);
  for (std::size_t a : rpn_pos) {
    out.push_back({SampleKind::kBoxRpn, features(anchors[a]), kObjectClass, assign[a].target_delta});
  }
  for (std::size_t a : rpn_neg) {
    out.push_back({SampleKind::kBoxRpn, features(anchors[a]), 0, std::nullopt});
  }

  // RoI samples for the head: every GT box, plus one overlapping anchor per GT,
  // plus background anchors.
  std::size_t head_pos = 0;
  auto add_positive = [&](const Box& roi, std::size_t g) {
    auto f = features(roi);
    out.push_back({SampleKind::kBoxObj, f, kObjectClass, std::nullopt});
    out.push_back({SampleKind::kBoxReg, f, 0, encode_delta(roi, view.boxes[g])});
    if (leaf_of[g] != kAncestorLabel) {
      out.push_back({SampleKind::kBoxCls, std::move(f), leaf_of[g], std::nullopt});
    }
    ++head_pos;
  };
  for (std::size_t g = 0; g < view.boxes.size(); ++g) {
    if (!covers_pixel(view.raster, view.boxes[g])) continue;
    add_positive(view.boxes[g], g);
    std::vector<std::size_t> near;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (iou(anchors[a], view.boxes[g]) >= config.head_positive_iou &&
          covers_pixel(view.raster, anchors[a])) {
        near.push_back(a);
      }
    }
    if (!near.empty()) add_positive(anchors[near[uniform_index(rng, near.size())]], g);
  }
  const auto head_neg = sample_without_replacement(
      neg, head_pos * static_cast<std::size_t>(config.head_negatives_per_positive), rng);
  for (std::size_t a : head_neg) {
    out.push_back({SampleKind::kBoxObj, features(anchors[a]), 0, std::nullopt});
  }
  return out;
}

std::vector<Sample> image_level_samples(const ModelParams& params, const AnnotatedImage& img,
                                        bool flip, const Taxonomy& taxonomy,
                                        const TrainConfig& config) {
  const auto view = view_of(img, flip);
  const auto proposals =
      propose(params, view.raster, config.k_imagelevel_proposals, config.detector);
  const auto labeled = label_imagelevel_proposals(proposals, img.label, taxonomy);
  std::vector<std::string> labels;
  for (const auto& s : labeled) labels.push_back(s.category);
  const auto filter = filter_ancestor_samples(labels, taxonomy);
  std::vector<Sample> out;
  for (std::size_t k : filter.kept) {
    out.push_back({SampleKind::kImageCls,
                   region_features(view.raster, labeled[k].proposal.box, config.detector.features),
                   static_cast<int>(leaf_index(taxonomy, labels[k])), std::nullopt});
  }
  return out;
}

}  // namespace

std::vector<Sample> build_batch_samples(const ModelParams& params, const Dataset& dataset,
                                        const Taxonomy& taxonomy, const Batch& batch,
                                        const TrainConfig& config, std::uint64_t batch_seed) {
  const std::size_t nb = batch.box_items.size();
  const std::size_t ni = config.image_level_noop ? 0 : batch.image_items.size();
  std::vector<std::vector<Sample>> parts(nb + ni);
  parallel_for(nb + ni, [&](std::size_t slot) {
    if (slot < nb) {
      const auto& item = batch.box_items[slot];
      Rng rng(derive_seed(batch_seed, slot));
      parts[slot] =
          box_level_samples(dataset.images[item.image], item.flip, taxonomy, config, rng);
    } else {
      const auto& item = batch.image_items[slot - nb];
      parts[slot] =
          image_level_samples(params, dataset.images[item.image], item.flip, taxonomy, config);
    }
  });
  std::vector<Sample> out;
  for (auto& p : parts) {
    for (auto& s : p) out.push_back(std::move(s));
  }
  return out;
}

TrainResult train(const Dataset& dataset, const Taxonomy& taxonomy, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result;
  result.params = ModelParams::zeros(feature_dim(config.detector.features),
                                     static_cast<int>(taxonomy.num_leaves()));
  ModelParams velocity = result.params;
  std::int64_t iter = 0;
  for (int epoch = 1; epoch <= config.total_epochs; ++epoch) {
    const auto batches = make_batches(dataset, config, derive_seed(config.seed, epoch));
    const auto per_epoch = static_cast<std::int64_t>(batches.size());
    for (const auto& batch : batches) {
      const auto samples = build_batch_samples(result.params, dataset, taxonomy, batch, config,
                                               derive_seed(config.seed ^ 0xB47C4ULL, iter));
      if (samples.empty()) {
        ++iter;
        continue;
      }
      auto [loss, grad] = batch_loss_and_grads(result.params, samples, config.loss);
      if (!std::isfinite(loss.l_cross)) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "iteration " + std::to_string(iter) + ": l_cross = " +
                        format_double(loss.l_cross));
      }
      const double lr = lr_schedule(iter, per_epoch, config);
      auto params = result.params.blocks();
      auto grads = grad.blocks();
      auto vels = velocity.blocks();
      for (std::size_t b = 0; b < params.size(); ++b) {
        auto& w = params[b]->weights;
        const auto& g = grads[b]->weights;
        auto& v = vels[b]->weights;
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (config.momentum > 0) {
            v[i] = config.momentum * v[i] + g[i];
            w[i] -= lr * v[i];
          } else {
            w[i] -= lr * g[i];
          }
        }
      }
      result.log.push_back({iter, epoch, lr, loss});
      ++iter;
    }
    if (on_epoch) on_epoch(epoch, result.params);
  }
  return result;
}

void write_log_csv(const std::vector<LogRecord>& log, const std::filesystem::path& path) {
  std::string s = "iter,lr,l_csrpn_b,l_reg_b,l_obj_b,l_cls_b,l_cls_i,l_cross\n";
  for (const auto& r : log) {
    s += std::to_string(r.iter) + "," + format_double(r.lr) + "," +
         format_double(r.loss.l_csrpn_b) + "," + format_double(r.loss.l_reg_b) + "," +
         format_double(r.loss.l_obj_b) + "," + format_double(r.loss.l_cls_b) + "," +
         format_double(r.loss.l_cls_i) + "," + format_double(r.loss.l_cross) + "\n";
  }
  write_file(path, s);
}

std::vector<LogRecord> read_log_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<LogRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    if (++lineno == 1 || trim_view(line).empty()) continue;
    const auto f = split(line, ',');
    std::vector<double> v;
    for (const auto& x : f) {
      auto d = parse_double(x);
      if (!d) throw Error(ErrorCode::kFormatError, path.string() + " line " + std::to_string(lineno));
      v.push_back(*d);
    }
    if (v.size() != 8) {
      throw Error(ErrorCode::kFormatError, path.string() + " line " + std::to_string(lineno));
    }
    LogRecord r;
    r.iter = static_cast<std::int64_t>(v[0]);
    r.lr = v[1];
    r.loss = {v[2], v[3], v[4], v[5], v[6], v[7]};
    out.push_back(r);
  }
  return out;
}

}  // namespace csdet

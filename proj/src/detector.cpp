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

#include "csdet/detector.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "csdet/error.hpp"

namespace csdet {

LinearBlock LinearBlock::zeros(int out, int in) {
  LinearBlock b;
  b.out = out;
  b.in = in;
  b.weights.assign(static_cast<std::size_t>(out) * (in + 1), 0.0);
  return b;
}

void LinearBlock::forward(std::span<const double> x, std::span<double> y) const {
  for (int o = 0; o < out; ++o) {
    const double* row = &weights[static_cast<std::size_t>(o) * (in + 1)];
    double acc = row[in];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void LinearBlock::accumulate(std::span<const double> x, std::span<const double> g,
                             double scale) {
  for (int o = 0; o < out; ++o) {
    const double go = scale * g[o];
    if (go == 0.0) continue;
    double* row = &weights[static_cast<std::size_t>(o) * (in + 1)];
    for (int i = 0; i < in; ++i) row[i] += go * x[i];
    row[in] += go;
  }
}

ModelParams ModelParams::zeros(int feature_dim, int num_leaves) {
  return {LinearBlock::zeros(2, feature_dim), LinearBlock::zeros(4, feature_dim),
          LinearBlock::zeros(2, feature_dim), LinearBlock::zeros(4, feature_dim),
          LinearBlock::zeros(num_leaves, feature_dim)};
}

Box apply_delta(const Box& anchor, BoxDelta delta, int width, int height) {
  delta.tw = std::clamp(delta.tw, -kMaxLogScale, kMaxLogScale);
  delta.th = std::clamp(delta.th, -kMaxLogScale, kMaxLogScale);
  return clip_box(decode_delta(anchor, delta), width, height);
}

namespace {

double object_probability(const std::array<double, 2>& scores) {
  const auto p = leaf_softmax(scores);
  return p[kObjectClass];
}

void check_dims(const ModelParams& params, const FeatureConfig& features) {
  if (params.feature_dim() != feature_dim(features)) {
    throw Error(ErrorCode::kDimMismatch,
                "model expects " + std::to_string(params.feature_dim()) +
                    " features, featurizer produces " + std::to_string(feature_dim(features)));
  }
}

}  // namespace

std::vector<AnchorOutput> rpn_forward(const ModelParams& params, const Raster& raster,
                                      std::span<const Box> anchors,
                                      const FeatureConfig& features) {
  check_dims(params, features);
  std::vector<AnchorOutput> out(anchors.size());
  std::vector<double> f(static_cast<std::size_t>(params.feature_dim()));
  std::array<double, 4> d{};
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (!covers_pixel(raster, anchors[a])) {
      out[a].valid = false;
      continue;
    }
    region_features(raster, anchors[a], features, f);
    params.rpn_obj.forward(f, out[a].scores);
    params.rpn_reg.forward(f, d);
    out[a].delta = {d[0], d[1], d[2], d[3]};
    out[a].objectness = object_probability(out[a].scores);
  }
  return out;
}

std::vector<Proposal> propose(const ModelParams& params, const Raster& raster, int k,
                              const DetectorConfig& config) {
  if (k < 1) return {};
  const auto anchors = config.anchors(raster.width(), raster.height());
  const auto outputs = rpn_forward(params, raster, anchors, config.features);
  std::vector<ScoredBox> candidates;
  candidates.reserve(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (!outputs[a].valid || outputs[a].objectness < config.min_objectness) continue;
    const Box box = apply_delta(anchors[a], outputs[a].delta, raster.width(), raster.height());
    if (!box.valid() || !covers_pixel(raster, box)) continue;
    candidates.push_back({box, outputs[a].objectness});
  }
  const auto kept = nms(candidates, config.proposal_nms);
  std::vector<Proposal> out;
  const std::size_t n = std::min(kept.size(), static_cast<std::size_t>(k));
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({candidates[kept[i]].box, candidates[kept[i]].score});
  }
  return out;
}

std::vector<ClassificationSample> label_imagelevel_proposals(
    std::span<const Proposal> proposals, const std::string& image_category,
    const Taxonomy& taxonomy) {
  taxonomy.node_id(image_category);
  std::vector<ClassificationSample> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) out.push_back({p, image_category, true});
  return out;
}

std::vector<ScoredRegion> score_proposals(const ModelParams& params, const Taxonomy& taxonomy,
                                          const Raster& raster, int k,
                                          const DetectorConfig& config) {
  check_dims(params, config.features);
  if (params.num_leaves() != static_cast<int>(taxonomy.num_leaves())) {
    throw Error(ErrorCode::kDimMismatch,
                "classifier has " + std::to_string(params.num_leaves()) +
                    " outputs, taxonomy has " + std::to_string(taxonomy.num_leaves()) +
                    " leaves");
  }
  const auto proposals = propose(params, raster, k, config);
  std::vector<ScoredRegion> out;
  out.reserve(proposals.size());
  std::vector<double> f(static_cast<std::size_t>(params.feature_dim()));
  std::vector<double> cls(taxonomy.num_leaves());
  std::array<double, 2> obj{};
  std::array<double, 4> d{};
  for (const auto& p : proposals) {
    region_features(raster, p.box, config.features, f);
    params.head_obj.forward(f, obj);
    params.head_reg.forward(f, d);
    params.head_cls.forward(f, cls);
    Box refined = apply_delta(p.box, {d[0], d[1], d[2], d[3]}, raster.width(), raster.height());
    if (!refined.valid()) refined = p.box;
    out.push_back({refined, object_probability(obj), aggregate(taxonomy, leaf_softmax(cls))});
  }
  return out;
}

std::vector<Detection> detect(const ModelParams& params, const Taxonomy& taxonomy,
                              const Raster& raster, int k, ReportNodes report,
                              const DetectorConfig& config) {
  const auto regions = score_proposals(params, taxonomy, raster, k, config);
  std::vector<Detection> out;
  for (Taxonomy::NodeId node = 0; node < taxonomy.num_nodes(); ++node) {
    if (report == ReportNodes::kLeafOnly && !taxonomy.is_leaf(node)) continue;
    std::vector<ScoredBox> cands;
    for (const auto& r : regions) {
      const double s = r.objectness * r.probs.values[node];
      if (s >= config.score_floor) cands.push_back({r.box, s});
    }
    for (std::size_t i : nms(cands, config.detection_nms)) {
      out.push_back({cands[i].box, taxonomy.nodes()[node], cands[i].score});
    }
  }
  return out;
}

std::string serialize_checkpoint(const ModelParams& params, const Taxonomy& taxonomy) {
  std::string buf = "CSCK";
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(params.feature_dim()));
  put_u32(buf, static_cast<std::uint32_t>(taxonomy.num_leaves()));
  for (const auto& name : taxonomy.leaf_order()) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
  }
  for (const auto* block : params.blocks()) {
    for (double w : block->weights) put_f64(buf, w);
  }
  return buf;
}

void save_checkpoint(const ModelParams& params, const Taxonomy& taxonomy,
                     const std::filesystem::path& path) {
  if (params.num_leaves() != static_cast<int>(taxonomy.num_leaves())) {
    throw Error(ErrorCode::kDimMismatch, "model and taxonomy disagree on leaf count");
  }
  write_file(path, serialize_checkpoint(params, taxonomy));
}

ModelParams load_checkpoint(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  const std::string buf = read_file(path);
  ByteReader in(buf, path.string());
  if (in.bytes(4) != "CSCK") throw Error(ErrorCode::kFormatError, path.string() + ": bad magic");
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormatError,
                path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto dim = in.u32();
  const auto leaves = in.u32();
  if (dim == 0 || dim > 4096 || leaves > 1'000'000) {
    throw Error(ErrorCode::kFormatError, path.string() + ": implausible header");
  }
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < leaves; ++i) names.push_back(in.bytes(in.u32()));
  if (names != taxonomy.leaf_order()) {
    throw Error(ErrorCode::kDimMismatch,
                path.string() + ": leaf order does not match the taxonomy");
  }
  ModelParams params = ModelParams::zeros(static_cast<int>(dim), static_cast<int>(leaves));
  for (auto* block : params.blocks()) {
    for (double& w : block->weights) w = in.f64();
  }
  if (!in.at_end()) throw Error(ErrorCode::kFormatError, path.string() + ": trailing bytes");
  return params;
}

}  // namespace csdet

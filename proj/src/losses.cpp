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

#include "csdet/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "csdet/error.hpp"

namespace csdet {

SoftmaxCeResult softmax_ce(std::span<const double> scores, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= scores.size()) {
    throw Error(ErrorCode::kLabelOutOfRange,
                "label " + std::to_string(label) + " for " + std::to_string(scores.size()) +
                    " classes");
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  const double log_z = m + std::log(z);
  SoftmaxCeResult r;
  r.loss = log_z - scores[label];
  r.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) r.grad[i] = std::exp(scores[i] - log_z);
  r.grad[label] -= 1.0;
  return r;
}

SmoothL1Result smooth_l1(const BoxDelta& pred, const BoxDelta& target, double beta) {
  const std::array<double, 4> p{pred.tx, pred.ty, pred.tw, pred.th};
  const std::array<double, 4> t{target.tx, target.ty, target.tw, target.th};
  std::array<double, 4> g{};
  double loss = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = p[i] - t[i];
    if (std::abs(d) < beta) {
      loss += 0.5 * d * d / beta;
      g[i] = d / beta;
    } else {
      loss += std::abs(d) - 0.5 * beta;
      g[i] = d > 0 ? 1.0 : -1.0;
    }
  }
  return {loss, {g[0], g[1], g[2], g[3]}};
}

namespace {

struct TermAccumulator {
  double sum = 0;
  std::size_t count = 0;
  double mean() const { return count ? sum / count : 0.0; }
};

int check_class_label(const Sample& s, int num_leaves) {
  if (s.label == kAncestorLabel) {
    throw Error(ErrorCode::kUnfilteredAncestorLabel,
                "classification sample still carries an ancestor label");
  }
  if (s.label < 0 || s.label >= num_leaves) {
    throw Error(ErrorCode::kLabelOutOfRange, "leaf label " + std::to_string(s.label));
  }
  return s.label;
}

}  // namespace

LossAndGrads batch_loss_and_grads(const ModelParams& params, std::span<const Sample> batch,
                                  const LossConfig& config) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "no samples");
  const int dim = params.feature_dim();

  // First pass: counts per term, so each term is averaged over its own
  // contributors.
  std::size_t n_rpn = 0, n_rpn_reg = 0, n_reg = 0, n_obj = 0, n_cls_b = 0, n_cls_i = 0;
  for (const auto& s : batch) {
    if (static_cast<int>(s.features.size()) != dim) {
      throw Error(ErrorCode::kDimMismatch, "sample feature length " +
                                               std::to_string(s.features.size()) +
                                               " != " + std::to_string(dim));
    }
    switch (s.kind) {
      case SampleKind::kBoxRpn:
        ++n_rpn;
        if (s.label == kObjectClass && s.target) ++n_rpn_reg;
        break;
      case SampleKind::kBoxReg:
        if (!s.target) throw Error(ErrorCode::kLabelOutOfRange, "regression sample without target");
        ++n_reg;
        break;
      case SampleKind::kBoxObj: ++n_obj; break;
      case SampleKind::kBoxCls:
        check_class_label(s, params.num_leaves());
        ++n_cls_b;
        break;
      case SampleKind::kImageCls:
        check_class_label(s, params.num_leaves());
        ++n_cls_i;
        break;
    }
  }

  const auto& w = config.weights;
  LossAndGrads out;
  out.grad = ModelParams::zeros(dim, params.num_leaves());
  TermAccumulator rpn_ce, rpn_l1, reg, obj, cls_b, cls_i;
  std::array<double, 2> two{};
  std::array<double, 4> four{};
  std::vector<double> many(static_cast<std::size_t>(params.num_leaves()));

  for (const auto& s : batch) {
    switch (s.kind) {
      case SampleKind::kBoxRpn: {
        if (s.label != 0 && s.label != kObjectClass) {
          throw Error(ErrorCode::kLabelOutOfRange, "objectness label must be 0 or 1");
        }
        params.rpn_obj.forward(s.features, two);
        const auto ce = softmax_ce(two, s.label);
        rpn_ce.sum += ce.loss;
        out.grad.rpn_obj.accumulate(s.features, ce.grad, w.csrpn_b / n_rpn);
        if (s.label == kObjectClass && s.target) {
          params.rpn_reg.forward(s.features, four);
          const auto l1 = smooth_l1({four[0], four[1], four[2], four[3]}, *s.target,
                                    config.smooth_l1_beta);
          rpn_l1.sum += l1.loss;
          const std::array<double, 4> g{l1.grad.tx, l1.grad.ty, l1.grad.tw, l1.grad.th};
          out.grad.rpn_reg.accumulate(s.features, g, w.csrpn_b / n_rpn_reg);
        }
        break;
      }
      case SampleKind::kBoxReg: {
        params.head_reg.forward(s.features, four);
        const auto l1 =
            smooth_l1({four[0], four[1], four[2], four[3]}, *s.target, config.smooth_l1_beta);
        reg.sum += l1.loss;
        const std::array<double, 4> g{l1.grad.tx, l1.grad.ty, l1.grad.tw, l1.grad.th};
        out.grad.head_reg.accumulate(s.features, g, w.reg_b / n_reg);
        break;
      }
      case SampleKind::kBoxObj: {
        if (s.label != 0 && s.label != kObjectClass) {
          throw Error(ErrorCode::kLabelOutOfRange, "objectness label must be 0 or 1");
        }
        params.head_obj.forward(s.features, two);
        const auto ce = softmax_ce(two, s.label);
        obj.sum += ce.loss;
        out.grad.head_obj.accumulate(s.features, ce.grad, w.obj_b / n_obj);
        break;
      }
      case SampleKind::kBoxCls:
      case SampleKind::kImageCls: {
        const bool image = s.kind == SampleKind::kImageCls;
        params.head_cls.forward(s.features, many);
        const auto ce = softmax_ce(many, s.label);
        (image ? cls_i : cls_b).sum += ce.loss;
        const double scale = image ? w.cls_i / n_cls_i : w.cls_b / n_cls_b;
        out.grad.head_cls.accumulate(s.features, ce.grad, scale);
        break;
      }
    }
  }
  rpn_ce.count = n_rpn;
  rpn_l1.count = n_rpn_reg;
  reg.count = n_reg;
  obj.count = n_obj;
  cls_b.count = n_cls_b;
  cls_i.count = n_cls_i;

  auto& l = out.loss;
  l.l_csrpn_b = w.csrpn_b * (rpn_ce.mean() + rpn_l1.mean());
  l.l_reg_b = w.reg_b * reg.mean();
  l.l_obj_b = w.obj_b * obj.mean();
  l.l_cls_b = w.cls_b * cls_b.mean();
  l.l_cls_i = w.cls_i * cls_i.mean();
  l.l_cross = l.l_csrpn_b + l.l_reg_b + l.l_obj_b + l.l_cls_b + l.l_cls_i;
  return out;
}

}  // namespace csdet

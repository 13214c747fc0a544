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

#include "csdet/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "csdet/error.hpp"
#include "csdet/parallel.hpp"
#include "csdet/text.hpp"

namespace csdet {

MatchResult greedy_match(std::span<const ScoredDetection> detections, const GtByImage& gts,
                         double iou_thresh) {
  MatchResult r;
  r.order.resize(detections.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), false);
  r.tp.reserve(detections.size());
  for (std::size_t idx : r.order) {
    const auto& d = detections[idx];
    int best = -1;
    double best_iou = iou_thresh;
    if (d.image < gts.size()) {
      const auto& g = gts[d.image];
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (used[d.image][j]) continue;
        const double v = iou(d.box, g[j]);
        if (v >= best_iou && (best < 0 || v > best_iou)) {
          best = static_cast<int>(j);
          best_iou = v;
        }
      }
    }
    if (best >= 0) used[d.image][static_cast<std::size_t>(best)] = true;
    r.tp.push_back(best >= 0);
  }
  return r;
}

std::vector<PRPoint> precision_recall(std::span<const double> ranked_scores,
                                      const std::vector<bool>& tp, std::size_t num_gt) {
  std::vector<PRPoint> out;
  out.reserve(tp.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]) ++hits;
    out.push_back({ranked_scores[i], static_cast<double>(hits) / static_cast<double>(i + 1),
                   num_gt ? static_cast<double>(hits) / static_cast<double>(num_gt) : 0.0});
  }
  return out;
}

double ap_from_ranked_flags(const std::vector<bool>& tp, std::size_t num_gt) {
  if (num_gt == 0 || tp.empty()) return 0.0;
  std::vector<double> precision(tp.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]) ++hits;
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  for (std::size_t i = tp.size() - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]) sum += precision[i];
  }
  return sum / static_cast<double>(num_gt);
}

std::optional<double> average_precision(std::span<const ScoredDetection> detections,
                                        const GtByImage& gts, double iou_thresh) {
  std::size_t num_gt = 0;
  for (const auto& g : gts) num_gt += g.size();
  if (num_gt == 0) return std::nullopt;
  return ap_from_ranked_flags(greedy_match(detections, gts, iou_thresh).tp, num_gt);
}

MeanAp mean_ap(const std::map<std::string, std::optional<double>>& per_category,
               const SplitMap& splits) {
  double sums[3] = {0, 0, 0};
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& [name, ap] : per_category) {
    if (!ap) continue;
    const auto split = splits.category_split(name);
    if (!split) continue;
    const int col = *split == Split::kBoxLevel ? 1 : 2;
    sums[0] += *ap;
    ++counts[0];
    sums[col] += *ap;
    ++counts[col];
  }
  auto mean = [&](int i) -> std::optional<double> {
    if (counts[i] == 0) return std::nullopt;
    return sums[i] / static_cast<double>(counts[i]);
  };
  return {mean(0), mean(1), mean(2)};
}

std::vector<ProposalRow> proposal_table(const std::vector<std::vector<Proposal>>& proposals,
                                        const std::vector<ProposalGt>& gts,
                                        std::span<const int> counts) {
  if (proposals.size() != gts.size()) {
    throw Error(ErrorCode::kLengthMismatch, "proposal lists and GT lists differ in length");
  }
  const std::size_t n_images = gts.size();
  std::vector<ProposalRow> rows;
  for (int k : counts) {
    ProposalRow row;
    row.count = k;
    struct Ranked {
      std::size_t image;
      const Proposal* p;
    };
    std::vector<Ranked> ranked;
    for (std::size_t i = 0; i < n_images; ++i) {
      const std::size_t n = std::min(proposals[i].size(), static_cast<std::size_t>(k));
      for (std::size_t j = 0; j < n; ++j) ranked.push_back({i, &proposals[i][j]});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return a.p->objectness > b.p->objectness;
    });

    for (int col = 0; col < 3; ++col) {
      auto in_col = [col](Split s) {
        return col == 0 || (col == 1) == (s == Split::kBoxLevel);
      };
      std::size_t num_gt = 0;
      std::vector<std::vector<bool>> used(n_images);
      for (std::size_t i = 0; i < n_images; ++i) {
        used[i].assign(gts[i].boxes.size(), false);
        for (Split s : gts[i].split) num_gt += in_col(s);
      }
      if (num_gt == 0) continue;

      std::vector<bool> tp;
      for (const auto& r : ranked) {
        const auto& g = gts[r.image];
        int best = -1;
        double best_iou = kEvalIou;
        bool other_hit = false;
        for (std::size_t j = 0; j < g.boxes.size(); ++j) {
          const double v = iou(r.p->box, g.boxes[j]);
          if (!in_col(g.split[j])) {
            other_hit = other_hit || v >= kEvalIou;
            continue;
          }
          if (used[r.image][j]) continue;
          if (v >= best_iou && (best < 0 || v > best_iou)) {
            best = static_cast<int>(j);
            best_iou = v;
          }
        }
        if (best >= 0) {
          used[r.image][static_cast<std::size_t>(best)] = true;
          tp.push_back(true);
        } else if (!other_hit) {
          tp.push_back(false);
        }
      }
      row.ap[col] = ap_from_ranked_flags(tp, num_gt);

      std::size_t recalled = 0;
      for (std::size_t i = 0; i < n_images; ++i) {
        const std::size_t n = std::min(proposals[i].size(), static_cast<std::size_t>(k));
        for (std::size_t j = 0; j < gts[i].boxes.size(); ++j) {
          if (!in_col(gts[i].split[j])) continue;
          for (std::size_t q = 0; q < n; ++q) {
            if (iou(proposals[i][q].box, gts[i].boxes[j]) >= kEvalIou) {
              ++recalled;
              break;
            }
          }
        }
      }
      row.ar[col] = static_cast<double>(recalled) / static_cast<double>(num_gt);
    }
    rows.push_back(row);
  }
  return rows;
}

EvalReport evaluate(const ModelParams& params, const Taxonomy& model_taxonomy,
                    const Taxonomy& gt_taxonomy, const Dataset& eval, const SplitMap& splits,
                    const EvalOptions& options) {
  const auto& counts = options.proposal_counts;
  if (counts.empty() || counts.front() < 1 ||
      std::adjacent_find(counts.begin(), counts.end(), std::greater_equal<int>()) !=
          counts.end()) {
    throw Error(ErrorCode::kConfigInvalid, "proposal counts must be positive and ascending");
  }
  if (options.detection_proposals < 1) {
    throw Error(ErrorCode::kConfigInvalid, "detection_proposals must be positive");
  }
  const auto categories = splits.categories();
  std::vector<Taxonomy::NodeId> cat_nodes;
  for (const auto& c : categories) cat_nodes.push_back(gt_taxonomy.node_id(c));

  const std::size_t n = eval.images.size();
  std::vector<std::vector<Proposal>> proposals(n);
  std::vector<std::vector<Detection>> detections(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& raster = eval.images[i].raster;
    proposals[i] = propose(params, raster, counts.back(), options.detector);
    detections[i] = detect(params, model_taxonomy, raster, options.detection_proposals,
                           ReportNodes::kAllNodes, options.detector);
  });

  std::vector<ProposalGt> pgt(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& a : eval.images[i].boxes) {
      pgt[i].boxes.push_back(a.box);
      pgt[i].split.push_back(splits.leaf_split(gt_taxonomy, a.category));
    }
  }

  EvalReport report;
  report.per_category.resize(categories.size());
  parallel_for(categories.size(), [&](std::size_t c) {
    const auto& name = categories[c];
    GtByImage gts(n);
    std::vector<ScoredDetection> dets;
    std::size_t num_gt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& a : eval.images[i].boxes) {
        if (gt_taxonomy.is_ancestor_or_self(cat_nodes[c], gt_taxonomy.node_id(a.category))) {
          gts[i].push_back(a.box);
          ++num_gt;
        }
      }
      for (const auto& d : detections[i]) {
        if (d.category == name) dets.push_back({i, d.box, d.score});
      }
    }
    auto& out = report.per_category[c];
    out.category = name;
    out.split = splits.category_split(name).value_or(Split::kBoxLevel);
    out.num_gt = num_gt;
    out.ap = average_precision(dets, gts);
  });

  std::map<std::string, std::optional<double>> aps;
  for (const auto& c : report.per_category) aps[c.category] = c.ap;
  report.map = mean_ap(aps, splits);
  report.proposals = proposal_table(proposals, pgt, counts);
  return report;
}

namespace {

const char* split_name(Split s) { return s == Split::kBoxLevel ? "box_level" : "image_level"; }

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::optional<double> parse_opt(const std::string& s, const std::string& where) {
  if (s == "NA") return std::nullopt;
  auto v = parse_double(s);
  if (!v) throw Error(ErrorCode::kFormatError, where + ": bad number '" + s + "'");
  return v;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::string& header, std::size_t cols) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != header) throw Error(ErrorCode::kFormatError, path.string() + ": bad header");
      continue;
    }
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != cols) {
      throw Error(ErrorCode::kFormatError,
                  path.string() + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(cols) + " fields");
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

constexpr const char* kPerCategoryHeader = "category,split,num_gt,ap";
constexpr const char* kSummaryHeader = "metric,value";
constexpr const char* kProposalHeader =
    "proposals,ap_all,ap_box_level,ap_image_level,ar_all,ar_box_level,ar_image_level";

}  // namespace

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, dir.string() + ": " + ec.message());

  std::string per = std::string(kPerCategoryHeader) + "\n";
  for (const auto& c : report.per_category) {
    per += c.category + "," + split_name(c.split) + "," + std::to_string(c.num_gt) + "," +
           opt(c.ap) + "\n";
  }
  write_file(dir / "per_category_ap.csv", per);

  std::string sum = std::string(kSummaryHeader) + "\n";
  sum += "mAP_all," + opt(report.map.all) + "\n";
  sum += "mAP_box_level," + opt(report.map.box_level) + "\n";
  sum += "mAP_image_level," + opt(report.map.image_level) + "\n";
  sum += "proposal_ranking,global\n";
  write_file(dir / "summary.csv", sum);

  std::string prop = std::string(kProposalHeader) + "\n";
  for (const auto& r : report.proposals) {
    prop += std::to_string(r.count);
    for (const auto& v : r.ap) prop += "," + opt(v);
    for (const auto& v : r.ar) prop += "," + opt(v);
    prop += "\n";
  }
  write_file(dir / "proposal_table.csv", prop);
}

EvalReport load_report(const std::filesystem::path& dir) {
  EvalReport report;
  const auto per_path = dir / "per_category_ap.csv";
  for (const auto& f : read_csv(per_path, kPerCategoryHeader, 4)) {
    CategoryAp c;
    c.category = f[0];
    if (f[1] == "box_level") {
      c.split = Split::kBoxLevel;
    } else if (f[1] == "image_level") {
      c.split = Split::kImageLevel;
    } else {
      throw Error(ErrorCode::kFormatError, per_path.string() + ": bad split '" + f[1] + "'");
    }
    c.num_gt = static_cast<std::size_t>(std::stoull(f[2]));
    c.ap = parse_opt(f[3], per_path.string());
    report.per_category.push_back(c);
  }
  const auto sum_path = dir / "summary.csv";
  for (const auto& f : read_csv(sum_path, kSummaryHeader, 2)) {
    if (f[0] == "mAP_all") report.map.all = parse_opt(f[1], sum_path.string());
    if (f[0] == "mAP_box_level") report.map.box_level = parse_opt(f[1], sum_path.string());
    if (f[0] == "mAP_image_level") report.map.image_level = parse_opt(f[1], sum_path.string());
  }
  const auto prop_path = dir / "proposal_table.csv";
  for (const auto& f : read_csv(prop_path, kProposalHeader, 7)) {
    ProposalRow r;
    r.count = std::stoi(f[0]);
    for (int i = 0; i < 3; ++i) {
      r.ap[i] = parse_opt(f[1 + i], prop_path.string());
      r.ar[i] = parse_opt(f[4 + i], prop_path.string());
    }
    report.proposals.push_back(r);
  }
  return report;
}

std::string format_report(const EvalReport& report) {
  auto cell = [](const std::optional<double>& v) {
    char buf[16];
    if (!v) return std::string("    NA");
    std::snprintf(buf, sizeof(buf), "%6.3f", *v);
    return std::string(buf);
  };
  std::string s;
  s += "mAP@0.5  all " + cell(report.map.all) + "  box-level " + cell(report.map.box_level) +
       "  image-level " + cell(report.map.image_level) + "\n";
  s += "proposals      AP:all    box  image    AR:all    box  image\n";
  for (const auto& r : report.proposals) {
    char head[16];
    std::snprintf(head, sizeof(head), "%9d", r.count);
    s += head;
    s += "   " + cell(r.ap[0]) + " " + cell(r.ap[1]) + " " + cell(r.ap[2]);
    s += "    " + cell(r.ar[0]) + " " + cell(r.ar[1]) + " " + cell(r.ar[2]) + "\n";
  }
  return s;
}

}  // namespace csdet

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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "csdet/error.hpp"
#include "csdet/evaluator.hpp"
#include "csdet/experiment.hpp"
#include "csdet/geometry.hpp"
#include "csdet/taxonomy.hpp"
#include "csdet/trainer.hpp"

namespace py = pybind11;
using namespace csdet;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

Box to_box(const BoxTuple& t) { return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)}; }
BoxTuple from_box(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

py::object opt(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["mAP_all"] = opt(r.map.all);
  d["mAP_box_level"] = opt(r.map.box_level);
  d["mAP_image_level"] = opt(r.map.image_level);
  py::dict per;
  for (const auto& c : r.per_category) per[py::str(c.category)] = opt(c.ap);
  d["per_category"] = per;
  py::list rows;
  for (const auto& row : r.proposals) {
    py::dict x;
    x["count"] = row.count;
    const char* cols[3] = {"all", "box_level", "image_level"};
    for (int i = 0; i < 3; ++i) {
      x[py::str(std::string("ap_") + cols[i])] = opt(row.ap[i]);
      x[py::str(std::string("ar_") + cols[i])] = opt(row.ar[i]);
    }
    rows.append(x);
  }
  d["proposals"] = rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cross-supervised detection core";

  py::register_exception<Error>(m, "CsdetError", PyExc_ValueError);

  py::class_<Taxonomy>(m, "Taxonomy")
      .def_property_readonly("nodes", &Taxonomy::nodes)
      .def_property_readonly("leaves", &Taxonomy::leaf_order)
      .def_property_readonly("root", &Taxonomy::root_name)
      .def_property_readonly("depth", &Taxonomy::depth)
      .def("is_leaf", py::overload_cast<const std::string&>(&Taxonomy::is_leaf, py::const_))
      .def("parent", [](const Taxonomy& t, const std::string& name) -> py::object {
        auto p = t.parent(t.node_id(name));
        return p ? py::object(py::str(t.nodes()[*p])) : py::object(py::none());
      });

  m.def("build_taxonomy", [](const std::vector<std::pair<std::string, std::string>>& edges) {
    return build_taxonomy(edges);
  }, py::arg("edges"), "Build from (child, parent) pairs.");
  m.def("load_taxonomy", &load_taxonomy, py::arg("path"));

  m.def("aggregate", [](const Taxonomy& t, const std::vector<double>& leaf_scores) {
    const auto probs = aggregate(t, leaf_softmax(leaf_scores));
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < t.num_nodes(); ++i) out[t.nodes()[i]] = probs.values[i];
    return out;
  }, py::arg("taxonomy"), py::arg("leaf_scores"),
        "Softmax over leaf scores, then sum into every ancestor.");

  m.def("iou", [](const BoxTuple& a, const BoxTuple& b) { return iou(to_box(a), to_box(b)); });
  m.def("nms", [](const std::vector<BoxTuple>& boxes, const std::vector<double>& scores,
                  double thresh) {
    if (boxes.size() != scores.size()) throw Error(ErrorCode::kLengthMismatch, "boxes vs scores");
    std::vector<ScoredBox> s;
    for (std::size_t i = 0; i < boxes.size(); ++i) s.push_back({to_box(boxes[i]), scores[i]});
    return nms(s, thresh);
  }, py::arg("boxes"), py::arg("scores"), py::arg("iou_thresh"));
  m.def("generate_anchors", [](int w, int h, int stride, const std::vector<double>& scales,
                               const std::vector<double>& ratios) {
    std::vector<BoxTuple> out;
    for (const auto& b : generate_anchors(w, h, stride, scales, ratios)) out.push_back(from_box(b));
    return out;
  });

  m.def("average_precision",
        [](const std::vector<std::tuple<std::size_t, BoxTuple, double>>& detections,
           const std::vector<std::vector<BoxTuple>>& gts, double thresh) {
          std::vector<ScoredDetection> d;
          for (const auto& [img, box, score] : detections) d.push_back({img, to_box(box), score});
          GtByImage g;
          for (const auto& per : gts) {
            g.emplace_back();
            for (const auto& b : per) g.back().push_back(to_box(b));
          }
          return average_precision(d, g, thresh);
        },
        py::arg("detections"), py::arg("gts"), py::arg("iou_thresh") = kEvalIou,
        "detections: (image, (x1, y1, x2, y2), score); gts: boxes per image. "
        "None when there is no ground truth.");

  m.def("gen_data", [](const std::filesystem::path& out, std::uint64_t seed,
                       std::optional<std::filesystem::path> config) {
    WorldConfig wc = config ? load_world_config(*config) : default_world_config();
    wc.seed = seed;
    const auto world = generate_dataset(wc);
    save_world(world, wc, out);
    return py::make_tuple(world.train.images.size(), world.eval.images.size());
  }, py::arg("out"), py::arg("seed") = 7, py::arg("config") = py::none());

  m.def("train", [](const std::filesystem::path& data, const std::filesystem::path& taxonomy,
                    const std::filesystem::path& out, std::uint64_t seed,
                    const std::string& config_text) {
    TrainConfig tc = parse_train_config(config_text);
    tc.seed = seed;
    const Taxonomy t = load_taxonomy(taxonomy);
    const Dataset d = load_dataset(data / "train" / "manifest.jsonl");
    std::filesystem::create_directories(out);
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(d, t, tc, [&](int epoch, const ModelParams& p) {
        save_checkpoint(p, t, out / ("epoch" + std::to_string(epoch) + ".ckpt"));
      });
    }
    write_log_csv(r.log, out / "log.csv");
    std::vector<double> losses;
    for (const auto& rec : r.log) losses.push_back(rec.loss.l_cross);
    return losses;
  }, py::arg("data"), py::arg("taxonomy"), py::arg("out"), py::arg("seed") = 7,
        py::arg("config") = "", "Returns l_cross per iteration.");

  m.def("evaluate", [](const std::filesystem::path& data, const std::filesystem::path& taxonomy,
                       const std::filesystem::path& ckpt, const std::filesystem::path& out,
                       const std::vector<int>& counts) {
    const Taxonomy t = load_taxonomy(taxonomy);
    const ModelParams p = load_checkpoint(ckpt, t);
    EvalOptions eo;
    eo.proposal_counts = counts;
    eo.detector.features = FeatureConfig::from_dim(p.feature_dim());
    const Dataset eval = load_dataset(data / "eval" / "manifest.jsonl");
    const SplitMap splits = load_splits(data / "splits.json");
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = evaluate(p, t, t, eval, splits, eo);
    }
    write_report(r, out);
    return report_dict(r);
  }, py::arg("data"), py::arg("taxonomy"), py::arg("ckpt"), py::arg("out"),
        py::arg("proposal_counts") = kDefaultProposalCounts);

  m.def("run_demo", [](std::uint64_t seed, const std::filesystem::path& out) {
    std::ostringstream log;
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = run_demo(seed, out, log);
    }
    return report_dict(r);
  }, py::arg("seed") = 7, py::arg("out") = "demo_out");
}

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

#include "csdet/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "csdet/error.hpp"
#include "csdet/random.hpp"

namespace csdet {

using nlohmann::json;

namespace {

// Stream offsets keep per-image seeds distinct across the three image sets.
constexpr std::uint64_t kTrainBoxStream = 0;
constexpr std::uint64_t kTrainImageStream = 1'000'000;
constexpr std::uint64_t kEvalStream = 2'000'000;

const char* shape_name(ShapeKind s) {
  switch (s) {
    case ShapeKind::kEllipse: return "ellipse";
    case ShapeKind::kRectangle: return "rectangle";
    case ShapeKind::kTriangle: return "triangle";
  }
  return "rectangle";
}

ShapeKind parse_shape(const std::string& s) {
  if (s == "ellipse") return ShapeKind::kEllipse;
  if (s == "rectangle") return ShapeKind::kRectangle;
  if (s == "triangle") return ShapeKind::kTriangle;
  throw Error(ErrorCode::kConfigInvalid, "unknown shape '" + s + "'");
}

std::vector<std::string> leaves_under(const Taxonomy& t, const std::string& category) {
  std::vector<std::string> out;
  for (std::size_t leaf : t.descendant_leaves(t.node_id(category))) {
    out.push_back(t.leaf_order()[leaf]);
  }
  return out;
}

std::vector<std::string> world_leaves(const Taxonomy& t, const WorldConfig& config) {
  std::set<std::string> all;
  for (const auto* list : {&config.box_level, &config.image_level}) {
    for (const auto& c : *list) {
      for (auto& leaf : leaves_under(t, c)) all.insert(leaf);
    }
  }
  return {all.begin(), all.end()};
}

bool inside_shape(ShapeKind shape, const Box& b, double px, double py) {
  switch (shape) {
    case ShapeKind::kRectangle:
      return px >= b.x1 && px < b.x2 && py >= b.y1 && py < b.y2;
    case ShapeKind::kEllipse: {
      const double dx = (px - b.center_x()) / (0.5 * b.width());
      const double dy = (py - b.center_y()) / (0.5 * b.height());
      return dx * dx + dy * dy <= 1.0;
    }
    case ShapeKind::kTriangle: {
      if (py < b.y1 || py >= b.y2) return false;
      const double half = 0.5 * b.width() * (py - b.y1) / b.height();
      return std::abs(px - b.center_x()) <= half;
    }
  }
  return false;
}

// Places objects with integer corners, rejecting overlaps above the
// configured IoU. The first object is always placed.
std::vector<SceneObject> place_objects(const std::vector<std::string>& leaves,
                                       const WorldConfig& config, Rng& rng,
                                       std::vector<std::size_t>* placed = nullptr) {
  std::vector<SceneObject> scene;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Appearance& app = config.appearance.at(leaves[i]);
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double side = uniform(rng, app.min_size, app.max_size);
      const double aspect = uniform(rng, config.min_aspect, config.max_aspect);
      const int w = std::clamp(static_cast<int>(std::lround(side / std::sqrt(aspect))), 4,
                               config.width);
      const int h = std::clamp(static_cast<int>(std::lround(side * std::sqrt(aspect))), 4,
                               config.height);
      const int x = uniform_int(rng, 0, config.width - w);
      const int y = uniform_int(rng, 0, config.height - h);
      const Box box{double(x), double(y), double(x + w), double(y + h)};
      bool ok = true;
      for (const auto& other : scene) {
        if (iou(box, other.box) > config.max_overlap_iou) {
          ok = false;
          break;
        }
      }
      if (ok) {
        scene.push_back({leaves[i], box});
        if (placed) placed->push_back(i);
        break;
      }
    }
  }
  return scene;
}

std::string make_id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%06d", prefix, index);
  return buf;
}

}  // namespace

void WorldConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigInvalid, msg); };
  Taxonomy t;
  try {
    t = build_taxonomy(taxonomy);
  } catch (const Error& e) {
    fail(std::string("taxonomy: ") + e.what());
  }
  if (box_level.empty() && image_level.empty()) fail("no categories configured");
  std::set<std::string> seen;
  for (const auto* list : {&box_level, &image_level}) {
    for (const auto& c : *list) {
      if (!t.contains(c)) fail("unknown category '" + c + "'");
      if (!seen.insert(c).second) {
        fail("category '" + c + "' is listed in both supervision sets or twice");
      }
    }
  }
  for (const auto& leaf : world_leaves(t, *this)) {
    auto it = appearance.find(leaf);
    if (it == appearance.end()) fail("no appearance for leaf '" + leaf + "'");
    const auto& a = it->second;
    if (!(a.min_size >= 4 && a.max_size >= a.min_size)) fail("bad size range for '" + leaf + "'");
    if (a.max_size * std::sqrt(std::max(max_aspect, 1.0 / min_aspect)) > std::min(width, height)) {
      fail("objects of '" + leaf + "' do not fit the raster");
    }
  }
  if (width < 32 || height < 32) fail("raster must be at least 32x32");
  if (min_objects < 1 || max_objects < min_objects) fail("bad objects_per_image range");
  if (train_box_images < 0 || train_image_images < 0 || eval_images < 0) {
    fail("image counts must be nonnegative");
  }
  if (train_box_images > 0 && box_level.empty()) fail("box-level images need box_level categories");
  if (train_image_images > 0 && image_level.empty()) {
    fail("image-level images need image_level categories");
  }
  if (!(noise >= 0 && background >= 0 && background <= 1)) fail("bad background/noise");
  if (!(distractor_prob >= 0 && distractor_prob <= 1)) fail("distractor_prob outside [0, 1]");
  if (!(max_overlap_iou >= 0 && max_overlap_iou <= 1)) fail("max_overlap_iou outside [0, 1]");
  if (!(min_aspect > 0 && max_aspect >= min_aspect)) fail("bad aspect range");
}

WorldConfig parse_world_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("world config: ") + e.what());
  }
  WorldConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "taxonomy") {
        c.taxonomy.clear();
        for (const auto& e : value) c.taxonomy.emplace_back(e.at(0), e.at(1));
      } else if (key == "appearance") {
        for (const auto& [leaf, spec] : value.items()) {
          Appearance a;
          a.shape = parse_shape(spec.at("shape").get<std::string>());
          for (int k = 0; k < 3; ++k) a.color[k] = spec.at("color").at(k).get<double>();
          a.color_jitter = spec.value("color_jitter", a.color_jitter);
          if (spec.contains("size")) {
            a.min_size = spec["size"].at(0).get<double>();
            a.max_size = spec["size"].at(1).get<double>();
          }
          c.appearance[leaf] = a;
        }
      } else if (key == "box_level") {
        c.box_level = value.get<std::vector<std::string>>();
      } else if (key == "image_level") {
        c.image_level = value.get<std::vector<std::string>>();
      } else if (key == "train_box_images") {
        c.train_box_images = value.get<int>();
      } else if (key == "train_image_images") {
        c.train_image_images = value.get<int>();
      } else if (key == "eval_images") {
        c.eval_images = value.get<int>();
      } else if (key == "objects_per_image") {
        c.min_objects = value.at(0).get<int>();
        c.max_objects = value.at(1).get<int>();
      } else if (key == "raster") {
        c.width = value.at(0).get<int>();
        c.height = value.at(1).get<int>();
      } else if (key == "background") {
        c.background = value.get<double>();
      } else if (key == "noise") {
        c.noise = value.get<double>();
      } else if (key == "distractor_prob") {
        c.distractor_prob = value.get<double>();
      } else if (key == "max_overlap_iou") {
        c.max_overlap_iou = value.get<double>();
      } else if (key == "aspect") {
        c.min_aspect = value.at(0).get<double>();
        c.max_aspect = value.at(1).get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else {
        throw Error(ErrorCode::kConfigInvalid, "unknown world config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("world config: ") + e.what());
  }
  c.validate();
  return c;
}

WorldConfig load_world_config(const std::filesystem::path& path) {
  return parse_world_config(read_file(path));
}

std::string world_config_to_json(const WorldConfig& c) {
  json j;
  j["taxonomy"] = json::array();
  for (const auto& [child, parent] : c.taxonomy) j["taxonomy"].push_back({child, parent});
  j["appearance"] = json::object();
  for (const auto& [leaf, a] : c.appearance) {
    j["appearance"][leaf] = {{"shape", shape_name(a.shape)},
                             {"color", a.color},
                             {"color_jitter", a.color_jitter},
                             {"size", {a.min_size, a.max_size}}};
  }
  j["box_level"] = c.box_level;
  j["image_level"] = c.image_level;
  j["train_box_images"] = c.train_box_images;
  j["train_image_images"] = c.train_image_images;
  j["eval_images"] = c.eval_images;
  j["objects_per_image"] = {c.min_objects, c.max_objects};
  j["raster"] = {c.width, c.height};
  j["background"] = c.background;
  j["noise"] = c.noise;
  j["distractor_prob"] = c.distractor_prob;
  j["max_overlap_iou"] = c.max_overlap_iou;
  j["aspect"] = {c.min_aspect, c.max_aspect};
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

WorldConfig default_world_config() {
  WorldConfig c;
  const std::array<std::pair<const char*, ShapeKind>, 3> shapes{
      {{"circle", ShapeKind::kEllipse},
       {"square", ShapeKind::kRectangle},
       {"triangle", ShapeKind::kTriangle}}};
  const std::array<const char*, 3> groups{"round", "boxy", "pointy"};
  const std::array<std::pair<const char*, std::array<double, 3>>, 4> colors{
      {{"red", {0.85, 0.20, 0.20}},
       {"green", {0.20, 0.80, 0.25}},
       {"blue", {0.25, 0.30, 0.90}},
       {"yellow", {0.85, 0.80, 0.20}}}};
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    c.taxonomy.emplace_back(groups[s], "object");
    for (std::size_t k = 0; k < colors.size(); ++k) {
      const std::string leaf = std::string(shapes[s].first) + "_" + colors[k].first;
      c.taxonomy.emplace_back(leaf, groups[s]);
      Appearance a;
      a.shape = shapes[s].second;
      a.color = colors[k].second;
      c.appearance[leaf] = a;
      // Alternate regimes so both see every color and every shape.
      ((s + k) % 2 == 0 ? c.box_level : c.image_level).push_back(leaf);
    }
  }
  return c;
}

std::optional<Split> SplitMap::category_split(const std::string& category) const {
  if (std::find(box_level.begin(), box_level.end(), category) != box_level.end()) {
    return Split::kBoxLevel;
  }
  if (std::find(image_level.begin(), image_level.end(), category) != image_level.end()) {
    return Split::kImageLevel;
  }
  return std::nullopt;
}

Split SplitMap::leaf_split(const Taxonomy& taxonomy, const std::string& leaf) const {
  std::optional<Taxonomy::NodeId> cur = taxonomy.node_id(leaf);
  while (cur) {
    if (auto s = category_split(taxonomy.nodes()[*cur])) return *s;
    cur = taxonomy.parent(*cur);
  }
  return Split::kBoxLevel;
}

std::vector<std::string> SplitMap::categories() const {
  std::vector<std::string> out = box_level;
  out.insert(out.end(), image_level.begin(), image_level.end());
  return out;
}

Raster render_image(std::span<const SceneObject> scene,
                    const std::map<std::string, Appearance>& appearance, int width,
                    int height, std::uint64_t seed, double background, double noise) {
  Rng rng(seed);
  auto noisy = [&](double v) {
    if (noise > 0) v += uniform(rng, -noise, noise);
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
  };
  Raster r(height, width, 3);
  for (auto& v : r.data()) v = noisy(background);
  for (const auto& obj : scene) {
    const Appearance& app = appearance.at(obj.leaf);
    std::array<double, 3> color = app.color;
    for (auto& ch : color) ch += uniform(rng, -app.color_jitter, app.color_jitter);
    const int c0 = std::max(0, static_cast<int>(std::floor(obj.box.x1)));
    const int c1 = std::min(width, static_cast<int>(std::ceil(obj.box.x2)));
    const int r0 = std::max(0, static_cast<int>(std::floor(obj.box.y1)));
    const int r1 = std::min(height, static_cast<int>(std::ceil(obj.box.y2)));
    for (int y = r0; y < r1; ++y) {
      for (int x = c0; x < c1; ++x) {
        const bool in = inside_shape(app.shape, obj.box, x + 0.5, y + 0.5);
        for (int ch = 0; ch < 3; ++ch) {
          const float v = noisy(color[ch]);
          if (in) r.at(y, x, ch) = v;
        }
      }
    }
  }
  return r;
}

GeneratedWorld generate_dataset(const WorldConfig& config) {
  config.validate();
  const Taxonomy taxonomy = build_taxonomy(config.taxonomy);
  const auto all_leaves = world_leaves(taxonomy, config);

  GeneratedWorld world;
  world.splits.box_level = config.box_level;
  world.splits.image_level = config.image_level;

  auto render = [&](const std::vector<SceneObject>& scene, Rng& rng) {
    return render_image(scene, config.appearance, config.width, config.height, rng(),
                        config.background, config.noise);
  };

  for (int i = 0; i < config.train_box_images; ++i) {
    Rng rng(derive_seed(config.seed, kTrainBoxStream + i));
    const int n = uniform_int(rng, config.min_objects, config.max_objects);
    std::vector<std::string> labels, leaves;
    for (int k = 0; k < n; ++k) {
      labels.push_back(config.box_level[uniform_index(rng, config.box_level.size())]);
      const auto pool = leaves_under(taxonomy, labels.back());
      leaves.push_back(pool[uniform_index(rng, pool.size())]);
    }
    std::vector<std::size_t> placed;
    const auto scene = place_objects(leaves, config, rng, &placed);
    AnnotatedImage img;
    img.id = make_id("train_box", i);
    img.supervision = Supervision::kBox;
    for (std::size_t k = 0; k < scene.size(); ++k) {
      img.boxes.push_back({scene[k].box, labels[placed[k]]});
    }
    img.raster = render(scene, rng);
    world.train.images.push_back(std::move(img));
  }

  for (int i = 0; i < config.train_image_images; ++i) {
    Rng rng(derive_seed(config.seed, kTrainImageStream + i));
    const std::string& category = config.image_level[i % config.image_level.size()];
    const auto pool = leaves_under(taxonomy, category);
    const int n = uniform_int(rng, config.min_objects, config.max_objects);
    std::vector<std::string> leaves;
    for (int k = 0; k < n; ++k) leaves.push_back(pool[uniform_index(rng, pool.size())]);
    if (uniform01(rng) < config.distractor_prob) {
      std::vector<std::string> others;
      for (const auto& leaf : all_leaves) {
        if (std::find(pool.begin(), pool.end(), leaf) == pool.end()) others.push_back(leaf);
      }
      if (!others.empty()) leaves.push_back(others[uniform_index(rng, others.size())]);
    }
    const auto scene = place_objects(leaves, config, rng);
    AnnotatedImage img;
    img.id = make_id("train_img", i);
    img.supervision = Supervision::kImage;
    img.label = category;
    img.raster = render(scene, rng);

    AnnotatedImage hidden;
    hidden.id = img.id;
    hidden.raster = img.raster;
    hidden.supervision = Supervision::kBox;
    for (const auto& obj : scene) hidden.boxes.push_back({obj.box, obj.leaf});
    world.hidden.images.push_back(std::move(hidden));
    world.train.images.push_back(std::move(img));
  }

  for (int i = 0; i < config.eval_images; ++i) {
    Rng rng(derive_seed(config.seed, kEvalStream + i));
    const int n = uniform_int(rng, config.min_objects, config.max_objects);
    std::vector<std::string> leaves;
    for (int k = 0; k < n; ++k) leaves.push_back(all_leaves[uniform_index(rng, all_leaves.size())]);
    const auto scene = place_objects(leaves, config, rng);
    AnnotatedImage img;
    img.id = make_id("eval", i);
    img.supervision = Supervision::kBox;
    for (const auto& obj : scene) img.boxes.push_back({obj.box, obj.leaf});
    img.raster = render(scene, rng);
    world.eval.images.push_back(std::move(img));
  }
  return world;
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "rasters");
  std::string manifest;
  for (const auto& img : dataset.images) {
    const std::string rel = "rasters/" + img.id + ".csrf";
    save_raster(img.raster, dir / rel);
    json rec;
    rec["id"] = img.id;
    rec["raster_path"] = rel;
    if (img.supervision == Supervision::kBox) {
      rec["supervision"] = "box";
      rec["boxes"] = json::array();
      for (const auto& a : img.boxes) {
        rec["boxes"].push_back({{"box", {a.box.x1, a.box.y1, a.box.x2, a.box.y2}},
                                {"category", a.category}});
      }
    } else {
      rec["supervision"] = "image";
      rec["label"] = img.label;
    }
    manifest += rec.dump() + "\n";
  }
  const fs::path path = dir / "manifest.jsonl";
  write_file(path, manifest);
  return path;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  const std::string text = read_file(manifest);
  const auto base = manifest.parent_path();
  Dataset ds;
  std::size_t lineno = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.filename().string() + " line " + std::to_string(lineno);
    auto bad = [&](const std::string& field, const std::string& what) {
      return Error(ErrorCode::kFormatError, where + ": field '" + field + "': " + what);
    };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError, where + ": " + e.what());
    }
    if (!rec.is_object()) throw Error(ErrorCode::kFormatError, where + ": not an object");
    auto str = [&](const char* field) {
      if (!rec.contains(field) || !rec[field].is_string()) throw bad(field, "missing or not a string");
      return rec[field].get<std::string>();
    };
    AnnotatedImage img;
    img.id = str("id");
    const std::string rel = str("raster_path");
    const std::string sup = str("supervision");
    if (sup == "box") {
      img.supervision = Supervision::kBox;
      if (!rec.contains("boxes") || !rec["boxes"].is_array()) throw bad("boxes", "missing array");
      for (std::size_t k = 0; k < rec["boxes"].size(); ++k) {
        const auto& b = rec["boxes"][k];
        const std::string field = "boxes[" + std::to_string(k) + "]";
        if (!b.is_object() || !b.contains("box") || !b["box"].is_array() || b["box"].size() != 4 ||
            !b.contains("category") || !b["category"].is_string()) {
          throw bad(field, "expected {box:[x1,y1,x2,y2], category}");
        }
        Annotation a;
        for (const auto& v : b["box"]) {
          if (!v.is_number()) throw bad(field + ".box", "non-numeric coordinate");
        }
        a.box = {b["box"][0].get<double>(), b["box"][1].get<double>(), b["box"][2].get<double>(),
                 b["box"][3].get<double>()};
        if (!a.box.valid()) throw bad(field + ".box", "degenerate box");
        a.category = b["category"].get<std::string>();
        img.boxes.push_back(std::move(a));
      }
    } else if (sup == "image") {
      img.supervision = Supervision::kImage;
      img.label = str("label");
    } else {
      throw bad("supervision", "expected \"box\" or \"image\"");
    }
    img.raster = load_raster(base / rel);
    for (const auto& a : img.boxes) {
      if (a.box.x1 < 0 || a.box.y1 < 0 || a.box.x2 > img.raster.width() ||
          a.box.y2 > img.raster.height()) {
        throw bad("boxes", "box outside raster");
      }
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

void save_world(const GeneratedWorld& world, const WorldConfig& config,
                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dataset(world.train, dir / "train");
  save_dataset(world.eval, dir / "eval");
  save_dataset(world.hidden, dir / "hidden");
  json splits{{"box_level", world.splits.box_level}, {"image_level", world.splits.image_level}};
  write_file(dir / "splits.json", splits.dump(2) + "\n");
  save_taxonomy(build_taxonomy(config.taxonomy), dir / "taxonomy.tsv");
  write_file(dir / "world.json", world_config_to_json(config));
}

SplitMap load_splits(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_file(path));
    return {j.at("box_level").get<std::vector<std::string>>(),
            j.at("image_level").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, path.string() + ": " + e.what());
  }
}

Dataset fully_supervised(const GeneratedWorld& world) {
  std::map<std::string, const AnnotatedImage*> hidden;
  for (const auto& img : world.hidden.images) hidden[img.id] = &img;
  Dataset out;
  for (const auto& img : world.train.images) {
    if (img.supervision == Supervision::kBox) {
      out.images.push_back(img);
    } else {
      out.images.push_back(*hidden.at(img.id));
    }
  }
  return out;
}

}  // namespace csdet

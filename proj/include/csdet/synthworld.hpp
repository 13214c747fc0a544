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

// Synthetic shape world with two supervision regimes.
//
// Categories are organized in a taxonomy; each leaf has a shape and a color
// distribution. Training images of box-level categories carry boxes, training
// images of image-level categories carry only a category name. Their boxes are
// kept in a separate hidden set that is never part of the public training
// annotation.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csdet/geometry.hpp"
#include "csdet/raster.hpp"
#include "csdet/taxonomy.hpp"

namespace csdet {

enum class ShapeKind { kEllipse, kRectangle, kTriangle };

struct Appearance {
  ShapeKind shape = ShapeKind::kRectangle;
  std::array<double, 3> color{0.5, 0.5, 0.5};
  // Per-instance uniform offset added to each channel.
  double color_jitter = 0.05;
  // Side length range; actual width/height also depend on the aspect draw.
  double min_size = 14;
  double max_size = 26;
};

struct WorldConfig {
  std::vector<TaxonomyEdge> taxonomy;
  std::map<std::string, Appearance> appearance;  // keyed by leaf
  std::vector<std::string> box_level;
  std::vector<std::string> image_level;
  int train_box_images = 200;
  int train_image_images = 200;
  int eval_images = 100;
  int min_objects = 1;
  int max_objects = 3;
  int width = 64;
  int height = 64;
  double background = 0.15;
  // Uniform per-pixel noise half-width; 0 disables noise.
  double noise = 0.04;
  double distractor_prob = 0.2;
  double max_overlap_iou = 0.1;
  // height / width
  double min_aspect = 0.7;
  double max_aspect = 1.4;
  std::uint64_t seed = 7;

  // Throws kConfigInvalid.
  void validate() const;
};

WorldConfig parse_world_config(const std::string& json_text);
WorldConfig load_world_config(const std::filesystem::path& path);
std::string world_config_to_json(const WorldConfig& config);

// Twelve leaves (three shapes x four colors) under three shape groups, six
// box-level and six image-level, with every color and shape present in both
// regimes.
WorldConfig default_world_config();

enum class Supervision { kBox, kImage };

struct Annotation {
  Box box;
  std::string category;

  bool operator==(const Annotation&) const = default;
};

struct AnnotatedImage {
  std::string id;
  Raster raster;
  Supervision supervision = Supervision::kBox;
  std::vector<Annotation> boxes;  // kBox only
  std::string label;              // kImage only

  bool operator==(const AnnotatedImage&) const = default;
};

struct Dataset {
  std::vector<AnnotatedImage> images;

  bool operator==(const Dataset&) const = default;
};

enum class Split { kBoxLevel, kImageLevel };

// Which supervision regime each category was trained under.
struct SplitMap {
  std::vector<std::string> box_level;
  std::vector<std::string> image_level;

  std::optional<Split> category_split(const std::string& category) const;
  // Split of a ground-truth leaf: the first category on the path from the
  // leaf to the root that belongs to a regime. Defaults to kBoxLevel.
  Split leaf_split(const Taxonomy& taxonomy, const std::string& leaf) const;
  // box_level followed by image_level.
  std::vector<std::string> categories() const;
};

struct GeneratedWorld {
  Dataset train;
  Dataset eval;     // every image carries full leaf-level boxes
  Dataset hidden;   // boxes of the image-level training images
  SplitMap splits;
};

// Throws kConfigInvalid.
GeneratedWorld generate_dataset(const WorldConfig& config);

struct SceneObject {
  std::string leaf;
  Box box;
};

// Draws shapes over a noisy background in list order, later objects on top.
Raster render_image(std::span<const SceneObject> scene,
                    const std::map<std::string, Appearance>& appearance, int width,
                    int height, std::uint64_t seed, double background = 0.15,
                    double noise = 0.04);

// Writes `<dir>/manifest.jsonl` and `<dir>/rasters/<id>.csrf`; returns the
// manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
// Throws kFormatError (with line and field) or kMissingRaster.
Dataset load_dataset(const std::filesystem::path& manifest);

// Layout: train/, eval/, hidden/, splits.json, taxonomy.tsv, world.json.
void save_world(const GeneratedWorld& world, const WorldConfig& config,
                const std::filesystem::path& dir);
SplitMap load_splits(const std::filesystem::path& path);

// Box-supervised copy of the training set in which image-level images get
// their hidden boxes. Used to train the fully supervised reference model.
Dataset fully_supervised(const GeneratedWorld& world);

}  // namespace csdet

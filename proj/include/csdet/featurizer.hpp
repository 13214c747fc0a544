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

// Hand-crafted region descriptor used in place of a learned backbone.
//
// Layout for a G x G grid (G = 4 gives 25 values):
//   [0, 3)        channel means, mapped to 2m - 1
//   [3, 6)        channel standard deviations, mapped to 2s
//   [6, 6 + G*G)  mean luminance of each grid cell (row-major), 2l - 1
//   next          log(width / height) / log(4)
//   next          2 * sqrt(pixel area / image area) - 1
//   last          edge density: 4 * (sum |dL/dx| + sum |dL/dy|) / pixel count
//
// Luminance is the mean over channels. A pixel belongs to the region when its
// center lies inside the box, i.e. columns [ceil(x1 - 0.5), ceil(x2 - 0.5)).

#pragma once

#include <span>
#include <vector>

#include "csdet/geometry.hpp"
#include "csdet/raster.hpp"

namespace csdet {

struct FeatureConfig {
  int grid = 4;
  // Keep only the first `truncate` values; 0 keeps everything. Small models
  // in gradient checks use this.
  int truncate = 0;

  // Throws kConfigInvalid.
  void validate() const;

  // Inverse of feature_dim for untruncated layouts. Throws kDimMismatch.
  static FeatureConfig from_dim(int dim);

  bool operator==(const FeatureConfig&) const = default;
};

int full_feature_dim(const FeatureConfig& config);
int feature_dim(const FeatureConfig& config);

// Index of the first grid value in the untruncated layout.
inline constexpr int kGridOffset = 6;

// Writes feature_dim(config) values into `out`. Throws kDegenerateBox when
// the box covers less than one pixel of the raster.
void region_features(const Raster& raster, const Box& box, const FeatureConfig& config,
                     std::span<double> out);

std::vector<double> region_features(const Raster& raster, const Box& box,
                                    const FeatureConfig& config = {});

// True when region_features would succeed.
bool covers_pixel(const Raster& raster, const Box& box);

}  // namespace csdet

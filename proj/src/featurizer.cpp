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

#include "csdet/featurizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "csdet/error.hpp"

namespace csdet {

namespace {

struct PixelRange {
  int c0, c1, r0, r1;
  int width() const { return c1 - c0; }
  int height() const { return r1 - r0; }
  long count() const { return static_cast<long>(width()) * height(); }
};

PixelRange pixel_range(const Raster& raster, const Box& box) {
  auto lo = [](double v, int n) { return std::clamp(static_cast<int>(std::ceil(v - 0.5)), 0, n); };
  return {lo(box.x1, raster.width()), lo(box.x2, raster.width()), lo(box.y1, raster.height()),
          lo(box.y2, raster.height())};
}

double luminance(const Raster& r, int y, int x) {
  double s = 0.0;
  for (int c = 0; c < r.channels(); ++c) s += r.at(y, x, c);
  return s / r.channels();
}

}  // namespace

void FeatureConfig::validate() const {
  if (grid < 1 || grid > 16) {
    throw Error(ErrorCode::kConfigInvalid, "feature grid must be in [1, 16]");
  }
  if (truncate < 0) throw Error(ErrorCode::kConfigInvalid, "feature truncate must be >= 0");
}

FeatureConfig FeatureConfig::from_dim(int dim) {
  for (int g = 1; g <= 16; ++g) {
    if (kGridOffset + g * g + 3 == dim) return {g, 0};
  }
  throw Error(ErrorCode::kDimMismatch,
              "feature dimension " + std::to_string(dim) + " matches no grid layout");
}

int full_feature_dim(const FeatureConfig& config) {
  return kGridOffset + config.grid * config.grid + 3;
}

int feature_dim(const FeatureConfig& config) {
  const int full = full_feature_dim(config);
  return config.truncate > 0 ? std::min(config.truncate, full) : full;
}

bool covers_pixel(const Raster& raster, const Box& box) {
  const auto p = pixel_range(raster, box);
  return p.width() > 0 && p.height() > 0;
}

void region_features(const Raster& raster, const Box& box, const FeatureConfig& config,
                     std::span<double> out) {
  const auto p = pixel_range(raster, box);
  if (p.width() <= 0 || p.height() <= 0) {
    throw Error(ErrorCode::kDegenerateBox, "box covers no pixel centers");
  }
  const int channels = std::min(raster.channels(), 3);
  const int g = config.grid;
  const double n = static_cast<double>(p.count());

  // Variance accumulates around the first pixel so constant regions give
  // exactly zero.
  std::array<double, 3> ref{}, sum{}, sumsq{};
  for (int c = 0; c < channels; ++c) ref[c] = raster.at(p.r0, p.c0, c);
  std::vector<double> cell_sum(static_cast<std::size_t>(g) * g, 0.0);
  std::vector<int> cell_count(static_cast<std::size_t>(g) * g, 0);
  std::vector<int> col_cell(p.width()), row_cell(p.height());
  for (int k = 0; k < g; ++k) {
    const int cb = (p.width() * k) / g, ce = (p.width() * (k + 1)) / g;
    for (int i = cb; i < ce; ++i) col_cell[i] = k;
    const int rb = (p.height() * k) / g, re = (p.height() * (k + 1)) / g;
    for (int i = rb; i < re; ++i) row_cell[i] = k;
  }

  double lum_total = 0.0, edges = 0.0;
  for (int y = p.r0; y < p.r1; ++y) {
    for (int x = p.c0; x < p.c1; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double d = raster.at(y, x, c) - ref[c];
        sum[c] += d;
        sumsq[c] += d * d;
      }
      const double l = luminance(raster, y, x);
      lum_total += l;
      const std::size_t cell =
          static_cast<std::size_t>(row_cell[y - p.r0]) * g + col_cell[x - p.c0];
      cell_sum[cell] += l;
      ++cell_count[cell];
      if (x + 1 < p.c1) edges += std::abs(luminance(raster, y, x + 1) - l);
      if (y + 1 < p.r1) edges += std::abs(luminance(raster, y + 1, x) - l);
    }
  }

  std::vector<double> full(static_cast<std::size_t>(full_feature_dim(config)), 0.0);
  for (int c = 0; c < channels; ++c) {
    const double m = sum[c] / n;
    full[c] = 2.0 * (ref[c] + m) - 1.0;
    full[3 + c] = 2.0 * std::sqrt(std::max(0.0, sumsq[c] / n - m * m));
  }
  const double lum_mean = lum_total / n;
  for (std::size_t cell = 0; cell < cell_sum.size(); ++cell) {
    const double l = cell_count[cell] > 0 ? cell_sum[cell] / cell_count[cell] : lum_mean;
    full[kGridOffset + cell] = 2.0 * l - 1.0;
  }
  const std::size_t tail = kGridOffset + cell_sum.size();
  full[tail] = std::log(static_cast<double>(p.width()) / p.height()) / std::log(4.0);
  full[tail + 1] =
      2.0 * std::sqrt(n / (static_cast<double>(raster.width()) * raster.height())) - 1.0;
  full[tail + 2] = 4.0 * edges / n;

  const std::size_t dim = static_cast<std::size_t>(feature_dim(config));
  if (out.size() != dim) {
    throw Error(ErrorCode::kDimMismatch, "feature output buffer has wrong length");
  }
  std::copy_n(full.begin(), dim, out.begin());
}

std::vector<double> region_features(const Raster& raster, const Box& box,
                                    const FeatureConfig& config) {
  std::vector<double> out(static_cast<std::size_t>(feature_dim(config)));
  region_features(raster, box, config, out);
  return out;
}

}  // namespace csdet

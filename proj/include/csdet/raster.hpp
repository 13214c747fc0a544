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

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace csdet {

// Row-major H x W x C float image, channels interleaved.
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels = 3, float fill = 0.0f)
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }

  float& at(int y, int x, int c) { return data_[offset(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[offset(y, x, c)]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t offset(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Binary layout: magic "CSRF", u32 H, u32 W, u32 C (little-endian), then
// H*W*C little-endian f32 values in row-major order.
void save_raster(const Raster& raster, const std::filesystem::path& path);
// Throws kMissingRaster if the file is absent, kFormatError if it is malformed.
Raster load_raster(const std::filesystem::path& path);

}  // namespace csdet

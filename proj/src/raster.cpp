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

#include "csdet/raster.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "csdet/error.hpp"

namespace csdet {

namespace {
constexpr std::array<char, 4> kMagic = {'C', 'S', 'R', 'F'};
}

void save_raster(const Raster& raster, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(16 + raster.data().size() * 4);
  buf.append(kMagic.data(), kMagic.size());
  put_u32(buf, static_cast<std::uint32_t>(raster.height()));
  put_u32(buf, static_cast<std::uint32_t>(raster.width()));
  put_u32(buf, static_cast<std::uint32_t>(raster.channels()));
  for (float v : raster.data()) put_u32(buf, std::bit_cast<std::uint32_t>(v));
  write_file(path, buf);
}

Raster load_raster(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingRaster, path.string());
  }
  const std::string buf = read_file(path);
  ByteReader in(buf, path.string());
  if (buf.size() < 16 || buf.compare(0, 4, kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::kFormatError, path.string() + ": bad raster magic");
  }
  in.skip(4);
  const auto h = in.u32();
  const auto w = in.u32();
  const auto c = in.u32();
  const std::uint64_t count = std::uint64_t{h} * w * c;
  if (h == 0 || w == 0 || c == 0 || buf.size() != 16 + count * 4) {
    throw Error(ErrorCode::kFormatError, path.string() + ": raster size mismatch");
  }
  Raster r(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (auto& v : r.data()) v = std::bit_cast<float>(in.u32());
  return r;
}

}  // namespace csdet

// Copyright 2026 The fmapood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "fmapood/tensor_io.hpp"

namespace fmo_test {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fmapood_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline fmapood::BoundingBox box(float x0, float y0, float x1, float y1) { return {x0, y0, x1, y1}; }

// Single-image StrideFeatureMaps from explicit tensors.
inline fmapood::StrideFeatureMaps make_maps(std::vector<fmapood::Tensor> tensors,
                                            std::vector<std::uint32_t> factors,
                                            std::uint32_t image_w, std::uint32_t image_h,
                                            std::string id = "img") {
  fmapood::StrideFeatureMaps m;
  m.image_id = std::move(id);
  m.image_width = image_w;
  m.image_height = image_h;
  for (std::size_t s = 0; s < tensors.size(); ++s) {
    m.per_stride.push_back({static_cast<std::uint32_t>(s + 1), factors[s], std::move(tensors[s])});
  }
  return m;
}

inline fmapood::Tensor random_tensor(std::vector<std::uint32_t> shape, std::mt19937_64& rng,
                                     float lo = -1.0F, float hi = 1.0F) {
  fmapood::Tensor t(std::move(shape));
  std::uniform_real_distribution<float> u(lo, hi);
  for (float& v : t.data) v = u(rng);
  return t;
}

}  // namespace fmo_test

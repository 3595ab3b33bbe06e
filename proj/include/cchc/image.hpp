// Copyright (c) the cchc project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CCHC_IMAGE_HPP_
#define CCHC_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace cchc {

// RGB image in the training domain: planar [3][height][width], values in [0,1].
// File conversion: v01 = v8/255, v8 = round(255*clamp(v01, 0, 1)).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // 3 * height * width, planar R then G then B

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<size_t>(3) * h * w, 0.0) {}

  int64_t pixels() const { return static_cast<int64_t>(height) * width; }
  double* plane(int c) { return data.data() + static_cast<int64_t>(c) * pixels(); }
  const double* plane(int c) const {
    return data.data() + static_cast<int64_t>(c) * pixels();
  }
  double& at(int c, int y, int x) {
    return data[static_cast<size_t>((static_cast<int64_t>(c) * height + y) * width + x)];
  }
  double at(int c, int y, int x) const {
    return data[static_cast<size_t>((static_cast<int64_t>(c) * height + y) * width + x)];
  }
};

// Planar 8-bit samples (same layout as Image::data); the byte-exactness
// currency for codec integrity checks.
std::vector<uint8_t> to_bytes8(const Image& img);
Image from_bytes8(int height, int width, const std::vector<uint8_t>& planar);

// Binary PPM (P6, maxval 255).  Throws IoError on filesystem failures and
// ParseError (with byte offset) on malformed content.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

}  // namespace cchc

#endif  // CCHC_IMAGE_HPP_

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

#include "cchc/image.hpp"

#include <cmath>
#include <fstream>

#include "cchc/errors.hpp"

namespace cchc {

namespace {

uint8_t to_u8(double v) {
  v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<uint8_t>(std::lround(255.0 * v));
}

// PPM token scanner: whitespace-separated decimal fields, with '#' comments
// running to end of line.
struct PpmScanner {
  const std::vector<char>& bytes;
  size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        return;
      }
    }
  }

  int next_int(const char* what) {
    skip_space_and_comments();
    const size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1 << 20) throw ParseError(std::string("ppm: oversized ") + what, start);
      ++pos;
    }
    if (pos == start) throw ParseError(std::string("ppm: expected ") + what, pos);
    return static_cast<int>(value);
  }
};

}  // namespace

std::vector<uint8_t> to_bytes8(const Image& img) {
  std::vector<uint8_t> out(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) out[i] = to_u8(img.data[i]);
  return out;
}

Image from_bytes8(int height, int width, const std::vector<uint8_t>& planar) {
  if (static_cast<int64_t>(planar.size()) != 3 * static_cast<int64_t>(height) * width)
    throw ArgumentError("from_bytes8: sample count does not match dimensions");
  Image img(height, width);
  for (size_t i = 0; i < planar.size(); ++i)
    img.data[i] = static_cast<double>(planar[i]) / 255.0;
  return img;
}

Image read_ppm(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(file)),
                          std::istreambuf_iterator<char>());

  PpmScanner scan{bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw ParseError("ppm: bad magic, want P6", 0);
  scan.pos = 2;

  const int width = scan.next_int("width");
  const int height = scan.next_int("height");
  const int maxval = scan.next_int("maxval");
  if (width < 1 || height < 1) throw ParseError("ppm: bad dimensions", scan.pos);
  if (maxval != 255) throw ParseError("ppm: only maxval 255 supported", scan.pos);

  // Exactly one whitespace byte separates the header from the samples.
  if (scan.pos >= bytes.size()) throw ParseError("ppm: truncated header", scan.pos);
  const char sep = bytes[scan.pos];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    throw ParseError("ppm: missing header terminator", scan.pos);
  ++scan.pos;

  const int64_t samples = 3 * static_cast<int64_t>(width) * height;
  if (static_cast<int64_t>(bytes.size()) - static_cast<int64_t>(scan.pos) < samples)
    throw ParseError("ppm: truncated pixel data", bytes.size());

  Image img(height, width);
  const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data()) + scan.pos;
  const int64_t plane = img.pixels();
  for (int64_t i = 0; i < plane; ++i) {
    img.data[static_cast<size_t>(i)] = p[3 * i] / 255.0;
    img.data[static_cast<size_t>(plane + i)] = p[3 * i + 1] / 255.0;
    img.data[static_cast<size_t>(2 * plane + i)] = p[3 * i + 2] / 255.0;
  }
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  if (img.height < 1 || img.width < 1) throw ArgumentError("write_ppm: empty image");
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path + " for writing");
  file << "P6\n" << img.width << " " << img.height << "\n255\n";
  const int64_t plane = img.pixels();
  std::vector<uint8_t> row(static_cast<size_t>(3) * img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int64_t i = static_cast<int64_t>(y) * img.width + x;
      row[static_cast<size_t>(3 * x)] = to_u8(img.data[static_cast<size_t>(i)]);
      row[static_cast<size_t>(3 * x + 1)] = to_u8(img.data[static_cast<size_t>(plane + i)]);
      row[static_cast<size_t>(3 * x + 2)] =
          to_u8(img.data[static_cast<size_t>(2 * plane + i)]);
    }
    file.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(row.size()));
  }
  if (!file) throw IoError("write failed for " + path);
}

}  // namespace cchc

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

#ifndef CCHC_ERRORS_HPP_
#define CCHC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cchc {

// Bad argument values or mismatched tensor/image dimensions.
class ArgumentError : public std::runtime_error {
 public:
  explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

// File system failures (open/read/write).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input: bitstream headers, PPM files, CSV rows.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, size_t offset)
      : std::runtime_error(msg + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit ParseError(const std::string& msg) : std::runtime_error(msg), offset_(0) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Entropy-coding failures: symbol outside the alphabet, truncated stream.
class CodingError : public std::runtime_error {
 public:
  explicit CodingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Encoder-side training failures (divergence after all restarts).
class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Budget allocation cannot be met even with every image at its cheapest point.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& msg, int64_t shortfall_bytes)
      : std::runtime_error(msg), shortfall_bytes_(shortfall_bytes) {}
  int64_t shortfall_bytes() const { return shortfall_bytes_; }

 private:
  int64_t shortfall_bytes_;
};

}  // namespace cchc

#endif  // CCHC_ERRORS_HPP_

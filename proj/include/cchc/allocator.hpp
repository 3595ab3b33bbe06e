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

#ifndef CCHC_ALLOCATOR_HPP_
#define CCHC_ALLOCATOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace cchc {

// One encode of one image: its size and a quality score (MS-SSIM, PSNR, or an
// externally computed metric -- the solver only compares values).
struct RdPoint {
  std::string image;
  int64_t bytes = 0;
  double quality = 0.0;
};

struct Allocation {
  std::vector<RdPoint> chosen;  // one per image, input order
  int64_t total_bytes = 0;
  double min_quality = 0.0;
  double mean_quality = 0.0;
};

// True iff every image has a point with quality >= threshold and the sum of
// the cheapest such points fits the budget.  Monotone: loosening the
// threshold never turns feasible into infeasible.
bool feasible(const std::vector<std::vector<RdPoint>>& per_image, int64_t budget,
              double threshold);

// Max-min selection: the highest threshold t (searched over the finite set of
// point qualities) with feasible(t), each image at its cheapest point of
// quality >= t; leftover budget is then spent greedily, repeatedly applying
// the upgrade with the best quality gain per extra byte that still fits.
// Throws InfeasibleError (with the shortfall) when even the cheapest points
// exceed the budget.
Allocation allocate_maxmin(const std::vector<std::vector<RdPoint>>& per_image,
                           int64_t budget);

}  // namespace cchc

#endif  // CCHC_ALLOCATOR_HPP_

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

#include "cchc/allocator.hpp"

#include <algorithm>
#include <limits>

#include "cchc/errors.hpp"

namespace cchc {

namespace {

// Index of the cheapest point with quality >= threshold, breaking byte ties
// toward higher quality then input order; -1 when no point qualifies.
int cheapest_at(const std::vector<RdPoint>& points, double threshold) {
  int best = -1;
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].quality < threshold) continue;
    if (best < 0 || points[i].bytes < points[static_cast<size_t>(best)].bytes ||
        (points[i].bytes == points[static_cast<size_t>(best)].bytes &&
         points[i].quality > points[static_cast<size_t>(best)].quality))
      best = static_cast<int>(i);
  }
  return best;
}

void check_input(const std::vector<std::vector<RdPoint>>& per_image) {
  if (per_image.empty()) throw ArgumentError("allocate: no images");
  for (const auto& points : per_image) {
    if (points.empty()) throw ArgumentError("allocate: image with no encodes");
    for (const auto& p : points)
      if (p.bytes < 0) throw ArgumentError("allocate: negative byte count");
  }
}

}  // namespace

bool feasible(const std::vector<std::vector<RdPoint>>& per_image, int64_t budget,
              double threshold) {
  int64_t total = 0;
  for (const auto& points : per_image) {
    const int idx = cheapest_at(points, threshold);
    if (idx < 0) return false;
    total += points[static_cast<size_t>(idx)].bytes;
    if (total > budget) return false;
  }
  return true;
}

Allocation allocate_maxmin(const std::vector<std::vector<RdPoint>>& per_image,
                           int64_t budget) {
  check_input(per_image);

  // Even the cheapest point per image may not fit.
  int64_t minimal = 0;
  for (const auto& points : per_image)
    minimal += points[static_cast<size_t>(cheapest_at(
                          points, -std::numeric_limits<double>::infinity()))]
                   .bytes;
  if (minimal > budget)
    throw InfeasibleError("allocate: cheapest encodes exceed the byte budget",
                          minimal - budget);

  // The optimal min quality is one of the point qualities; feasible() is
  // monotone in the threshold, so binary search over the sorted set.
  std::vector<double> qualities;
  for (const auto& points : per_image)
    for (const auto& p : points) qualities.push_back(p.quality);
  std::sort(qualities.begin(), qualities.end());
  qualities.erase(std::unique(qualities.begin(), qualities.end()), qualities.end());

  size_t lo = 0, hi = qualities.size() - 1;  // feasible(qualities[lo]) holds
  while (lo < hi) {
    const size_t mid = lo + (hi - lo + 1) / 2;
    if (feasible(per_image, budget, qualities[mid]))
      lo = mid;
    else
      hi = mid - 1;
  }
  const double threshold = qualities[lo];

  std::vector<int> pick(per_image.size());
  int64_t total = 0;
  for (size_t i = 0; i < per_image.size(); ++i) {
    pick[i] = cheapest_at(per_image[i], threshold);
    total += per_image[i][static_cast<size_t>(pick[i])].bytes;
  }

  // Spend the leftover on the best quality-per-byte upgrade until none fits.
  // Upgrades only ever raise a member's quality, so the max-min is preserved.
  for (;;) {
    size_t best_i = 0;
    int best_j = -1;
    double best_rate = -1.0;
    for (size_t i = 0; i < per_image.size(); ++i) {
      const RdPoint& cur = per_image[i][static_cast<size_t>(pick[i])];
      for (size_t j = 0; j < per_image[i].size(); ++j) {
        const RdPoint& p = per_image[i][j];
        if (p.quality <= cur.quality) continue;
        const int64_t extra = p.bytes - cur.bytes;
        if (total + extra > budget) continue;
        const double rate = extra <= 0
                                ? std::numeric_limits<double>::infinity()
                                : (p.quality - cur.quality) / static_cast<double>(extra);
        if (best_j < 0 || rate > best_rate) {
          best_i = i;
          best_j = static_cast<int>(j);
          best_rate = rate;
        }
      }
    }
    if (best_j < 0) break;
    total += per_image[best_i][static_cast<size_t>(best_j)].bytes -
             per_image[best_i][static_cast<size_t>(pick[best_i])].bytes;
    pick[best_i] = best_j;
  }

  Allocation out;
  out.total_bytes = total;
  out.min_quality = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < per_image.size(); ++i) {
    const RdPoint& p = per_image[i][static_cast<size_t>(pick[i])];
    out.chosen.push_back(p);
    out.min_quality = std::min(out.min_quality, p.quality);
    out.mean_quality += p.quality;
  }
  out.mean_quality /= static_cast<double>(per_image.size());
  return out;
}

}  // namespace cchc

#pragma once

// Brute-force reference implementations used to cross-check the fast kernels.
// Deliberately written from the definitions, independent of kernels.hpp
// internals.

#include <algorithm>
#include <limits>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"

namespace pcf::oracle {

// O(n^2) max-min selection: recomputes each candidate's distance to the
// picked set from scratch on every round.
inline std::vector<int> fps_brute(const Cloud& cloud, size_t n, size_t start = 0) {
  const size_t count = cloud.size();
  if (count == 0) throw Error::argument("fps_brute: empty cloud");
  if (n == 0 || n > count) throw Error::argument("fps_brute: bad sample count");
  if (start >= count) throw Error::argument("fps_brute: start index out of range");
  std::vector<int> picks = {static_cast<int>(start)};
  std::vector<bool> taken(count, false);
  taken[start] = true;
  while (picks.size() < n) {
    double best = -1.0;
    int best_idx = -1;
    for (size_t i = 0; i < count; ++i) {
      if (taken[i]) continue;
      double to_set = std::numeric_limits<double>::infinity();
      for (int p : picks) {
        const double dx = cloud.points[i].x - cloud.points[static_cast<size_t>(p)].x;
        const double dy = cloud.points[i].y - cloud.points[static_cast<size_t>(p)].y;
        const double dz = cloud.points[i].z - cloud.points[static_cast<size_t>(p)].z;
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < to_set) to_set = d;
      }
      if (to_set > best) {
        best = to_set;
        best_idx = static_cast<int>(i);
      }
    }
    picks.push_back(best_idx);
    taken[static_cast<size_t>(best_idx)] = true;
  }
  return picks;
}

// All source indices within radius of the center, ascending.
inline std::vector<int> ball_brute(const Cloud& src, const Vec3& center, double radius) {
  std::vector<int> out;
  for (size_t i = 0; i < src.size(); ++i) {
    const Vec3 d = src.points[i] - center;
    if (d.dot(d) <= radius * radius) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Exact k nearest source indices, ties by lowest index.
inline std::vector<int> knn_brute(const Cloud& src, const Vec3& center, size_t k) {
  std::vector<std::pair<double, int>> dist;
  dist.reserve(src.size());
  for (size_t i = 0; i < src.size(); ++i) {
    const Vec3 d = src.points[i] - center;
    dist.emplace_back(d.dot(d), static_cast<int>(i));
  }
  std::sort(dist.begin(), dist.end());
  std::vector<int> out;
  for (size_t j = 0; j < k && j < dist.size(); ++j) out.push_back(dist[j].second);
  return out;
}

}  // namespace pcf::oracle

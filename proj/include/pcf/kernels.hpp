#pragma once

// Point-cloud kernels: farthest-point sampling, fixed-radius ball query with
// fixed fan-out, exact k-NN, and contact/label association. All distances in
// meters; all operations deterministic with ties broken by lowest index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"

namespace pcf {

// Greedy max-min selection. First pick is `start`; each following pick
// maximizes the distance to the already-picked set.
inline std::vector<int> fps(const Cloud& cloud, size_t n, size_t start = 0) {
  const size_t count = cloud.size();
  if (count == 0) throw Error::argument("fps: empty cloud");
  if (n == 0 || n > count)
    throw Error::argument("fps: requested " + std::to_string(n) + " of " + std::to_string(count) +
                          " points");
  if (start >= count) throw Error::argument("fps: start index out of range");

  // SoA layout keeps the update pass vectorizable. Picked points get a -1
  // sentinel so they never win the argmax again (distances are >= 0).
  std::vector<double> xs(count), ys(count), zs(count), dmin(count, 1e300);
  for (size_t i = 0; i < count; ++i) {
    xs[i] = cloud.points[i].x;
    ys[i] = cloud.points[i].y;
    zs[i] = cloud.points[i].z;
  }
  constexpr size_t B = 512;
  const size_t nb = (count + B - 1) / B;
  std::vector<double> bmax(nb, 0.0);

  std::vector<int> picks(n);
  picks[0] = static_cast<int>(start);
  dmin[start] = -1.0;
  size_t cur = start;
  for (size_t pick = 1; pick < n; ++pick) {
    const double cx = xs[cur], cy = ys[cur], cz = zs[cur];
    const double* __restrict px = xs.data();
    const double* __restrict py = ys.data();
    const double* __restrict pz = zs.data();
    double* __restrict dm = dmin.data();
    for (size_t b = 0; b < nb; ++b) {
      const size_t lo = b * B, hi = std::min(count, lo + B);
      double mx = -std::numeric_limits<double>::infinity();
#pragma omp simd reduction(max : mx)
      for (size_t i = lo; i < hi; ++i) {
        const double dx = px[i] - cx, dy = py[i] - cy, dz = pz[i] - cz;
        const double d = dx * dx + dy * dy + dz * dz;
        const double nd = d < dm[i] ? d : dm[i];
        dm[i] = nd;
        mx = nd > mx ? nd : mx;
      }
      bmax[b] = mx;
    }
    size_t argb = 0;
    double mx = bmax[0];
    for (size_t b = 1; b < nb; ++b)
      if (bmax[b] > mx) {
        mx = bmax[b];
        argb = b;
      }
    size_t arg = argb * B;
    for (size_t i = argb * B; i < std::min(count, argb * B + B); ++i)
      if (dmin[i] == mx) {
        arg = i;
        break;
      }
    picks[pick] = static_cast<int>(arg);
    dmin[arg] = -1.0;
    cur = arg;
  }
  return picks;
}

// Fixed fan-out neighbor lists. neighbor_idx is centers.size() x fanout,
// row-major; slots past valid_count repeat the first valid neighbor, or fall
// back to the center's own index when the ball is empty.
struct NeighborGroup {
  std::vector<int> centers;       // indices into the query cloud (0..M-1)
  size_t fanout = 0;              // K
  std::vector<int> neighbor_idx;  // M*K indices into the source cloud
  std::vector<int> valid_count;   // per center, number of real neighbors (<= K)

  size_t center_count() const { return centers.size(); }
  int neighbor(size_t center, size_t slot) const { return neighbor_idx[center * fanout + slot]; }
};

namespace detail {

struct CellHash {
  size_t operator()(uint64_t k) const noexcept { return std::hash<uint64_t>{}(k); }
};

inline uint64_t cell_key(int64_t ix, int64_t iy, int64_t iz) {
  constexpr uint64_t off = 1u << 20;
  return ((static_cast<uint64_t>(ix + off) & 0x1FFFFF) << 42) |
         ((static_cast<uint64_t>(iy + off) & 0x1FFFFF) << 21) |
         (static_cast<uint64_t>(iz + off) & 0x1FFFFF);
}

// Uniform grid over the source points with cell size = radius.
class PointGrid {
public:
  PointGrid(const Cloud& cloud, double cell) : cloud_(cloud), cell_(cell) {
    buckets_.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i)
      buckets_[key_of(cloud.points[i])].push_back(static_cast<int>(i));
  }

  // Collects source indices within `radius` of c, ascending index order.
  void query(const Vec3& c, double radius, std::vector<int>& out) const {
    out.clear();
    const double r2 = radius * radius;
    const int64_t ix = coord(c.x), iy = coord(c.y), iz = coord(c.z);
    for (int64_t dx = -1; dx <= 1; ++dx)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dz = -1; dz <= 1; ++dz) {
          auto it = buckets_.find(cell_key(ix + dx, iy + dy, iz + dz));
          if (it == buckets_.end()) continue;
          for (int i : it->second)
            if ((cloud_.points[static_cast<size_t>(i)] - c).squared_norm() <= r2)
              out.push_back(i);
        }
    std::sort(out.begin(), out.end());
  }

private:
  int64_t coord(double v) const { return static_cast<int64_t>(std::floor(v / cell_)); }
  uint64_t key_of(const Vec3& p) const { return cell_key(coord(p.x), coord(p.y), coord(p.z)); }

  const Cloud& cloud_;
  double cell_;
  std::unordered_map<uint64_t, std::vector<int>, CellHash> buckets_;
};

inline void pad_group(std::vector<int>& row_out, size_t k, size_t center_index,
                      size_t src_count) {
  if (row_out.empty()) {
    const int self = static_cast<int>(std::min(center_index, src_count - 1));
    row_out.assign(k, self);
  } else {
    while (row_out.size() < k) row_out.push_back(row_out.front());
  }
}

}  // namespace detail

// Up to k source points within `radius` of each center, in ascending source
// index order. Uses a grid hash above 256 source points, linear scan below.
inline NeighborGroup query_ball(const Cloud& src, const Cloud& centers, double radius, size_t k) {
  if (radius <= 0.0) throw Error::argument("query_ball: radius must be positive");
  if (k == 0) throw Error::argument("query_ball: fan-out must be at least 1");
  if (src.size() == 0) throw Error::argument("query_ball: empty source cloud");

  NeighborGroup out;
  out.fanout = k;
  out.centers.resize(centers.size());
  for (size_t i = 0; i < centers.size(); ++i) out.centers[i] = static_cast<int>(i);
  out.neighbor_idx.reserve(centers.size() * k);
  out.valid_count.resize(centers.size());

  const bool use_grid = src.size() >= 256;
  detail::PointGrid* grid = nullptr;
  std::unique_ptr<detail::PointGrid> grid_holder;
  if (use_grid) {
    grid_holder = std::make_unique<detail::PointGrid>(src, radius);
    grid = grid_holder.get();
  }

  const double r2 = radius * radius;
  std::vector<int> found;
  for (size_t ci = 0; ci < centers.size(); ++ci) {
    const Vec3& c = centers.points[ci];
    if (grid) {
      grid->query(c, radius, found);
    } else {
      found.clear();
      for (size_t i = 0; i < src.size(); ++i)
        if ((src.points[i] - c).squared_norm() <= r2) found.push_back(static_cast<int>(i));
    }
    if (found.size() > k) found.resize(k);
    out.valid_count[ci] = static_cast<int>(found.size());
    detail::pad_group(found, k, ci, src.size());
    out.neighbor_idx.insert(out.neighbor_idx.end(), found.begin(), found.end());
  }
  return out;
}

// Exact k nearest neighbors by Euclidean distance, ties by lowest index.
inline NeighborGroup knn(const Cloud& src, const Cloud& centers, size_t k) {
  if (k == 0) throw Error::argument("knn: k must be at least 1");
  if (k > src.size())
    throw Error::argument("knn: k=" + std::to_string(k) + " exceeds source size " +
                          std::to_string(src.size()));
  NeighborGroup out;
  out.fanout = k;
  out.centers.resize(centers.size());
  for (size_t i = 0; i < centers.size(); ++i) out.centers[i] = static_cast<int>(i);
  out.neighbor_idx.resize(centers.size() * k);
  out.valid_count.assign(centers.size(), static_cast<int>(k));

  std::vector<std::pair<double, int>> dist(src.size());
  for (size_t ci = 0; ci < centers.size(); ++ci) {
    const Vec3& c = centers.points[ci];
    for (size_t i = 0; i < src.size(); ++i)
      dist[i] = {(src.points[i] - c).squared_norm(), static_cast<int>(i)};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
    for (size_t j = 0; j < k; ++j) out.neighbor_idx[ci * k + j] = dist[j].second;
  }
  return out;
}

struct LabelMatch {
  bool positive = false;
  int label_index = -1;  // nearest label point within the radius
};

// A contact is positive iff some label point lies within `radius` (2 mm by
// default); the matched index is the nearest such point.
inline std::vector<LabelMatch> associate_labels(const Cloud& contacts, const Cloud& label_points,
                                                double radius = 0.002) {
  if (radius <= 0.0) throw Error::argument("associate_labels: radius must be positive");
  std::vector<LabelMatch> out(contacts.size());
  const double r2 = radius * radius;
  for (size_t i = 0; i < contacts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (size_t j = 0; j < label_points.size(); ++j) {
      const double d2 = (label_points.points[j] - contacts.points[i]).squared_norm();
      if (d2 <= r2 && d2 < best) {
        best = d2;
        best_idx = static_cast<int>(j);
      }
    }
    out[i] = {best_idx >= 0, best_idx};
  }
  return out;
}

}  // namespace pcf

#pragma once

// Converts concatenated original+completion points into a per-point shape
// feature: per scale, a fixed-radius ball query around each original point,
// an MLP over relative coordinates, and a max-pool over the ball; the three
// per-scale features concatenate into one row per original point.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"
#include "pcf/kernels.hpp"
#include "pcf/params.hpp"
#include "pcf/random.hpp"
#include "pcf/tensor.hpp"

namespace pcf {

struct PcfConfig {
  std::vector<double> radii = {0.04, 0.08, 0.16};
  std::vector<size_t> fanouts = {64, 64, 128};
  std::vector<std::vector<size_t>> mlp_widths = {{32, 32, 64}, {64, 64, 128}, {64, 64, 128}};

  size_t scales() const { return radii.size(); }

  size_t out_channels() const {
    size_t total = 0;
    for (const auto& widths : mlp_widths) total += widths.back();
    return total;
  }

  void validate() const {
    if (radii.size() != fanouts.size() || radii.size() != mlp_widths.size() || radii.empty())
      throw Error::validation("pcf config: radii/fanouts/mlp_widths must align");
    for (size_t s = 0; s < scales(); ++s) {
      if (radii[s] <= 0.0) throw Error::validation("pcf config: radii must be positive");
      if (fanouts[s] == 0) throw Error::validation("pcf config: fan-outs must be positive");
      if (mlp_widths[s].empty()) throw Error::validation("pcf config: empty MLP stack");
    }
  }
};

// Original points first, completion appended; both clouds must agree on
// frame and point count.
inline Cloud concat_points(const Cloud& original, const Cloud& completion) {
  if (original.size() != completion.size())
    throw Error::validation("concat_points: point counts differ (" +
                            std::to_string(original.size()) + " vs " +
                            std::to_string(completion.size()) + ")");
  if (original.frame != completion.frame)
    throw Error::validation("concat_points: clouds are in different frames");
  Cloud out;
  out.frame = original.frame;
  out.points = original.points;
  out.points.insert(out.points.end(), completion.points.begin(), completion.points.end());
  return out;
}

namespace detail {

// He-style init, weights N(0, sqrt(2/fan_in)), zero biases.
inline void init_mlp_params(ParamStore& store, const std::string& prefix, size_t in_channels,
                            const std::vector<size_t>& widths, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  size_t in = in_channels;
  for (size_t l = 0; l < widths.size(); ++l) {
    const size_t out = widths[l];
    std::vector<double> w(in * out);
    const double s = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : w) v = s * n(rng);
    store.add(prefix + ".l" + std::to_string(l) + ".W", Tensor({in, out}, std::move(w)));
    store.add(prefix + ".l" + std::to_string(l) + ".b", Tensor::zeros({out}));
    in = out;
  }
}

// relu(x W + b) stack applied rowwise.
inline Tensor mlp_forward(Tensor rows, const std::string& prefix, size_t layers,
                          const ParamView& params) {
  for (size_t l = 0; l < layers; ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    rows = relu(add_bias(matmul(rows, params.at(base + ".W")), params.at(base + ".b")));
  }
  return rows;
}

// Neighbor coordinates relative to their center, [centers*fanout x 3].
inline Tensor group_relative_coords(const Cloud& src, const Cloud& centers,
                                    const NeighborGroup& group) {
  const size_t m = group.center_count(), k = group.fanout;
  std::vector<double> rel(m * k * 3);
  for (size_t i = 0; i < m; ++i) {
    const Vec3& c = centers.points[i];
    for (size_t j = 0; j < k; ++j) {
      const Vec3 d = src.points[static_cast<size_t>(group.neighbor(i, j))] - c;
      const size_t base = (i * k + j) * 3;
      rel[base] = d.x;
      rel[base + 1] = d.y;
      rel[base + 2] = d.z;
    }
  }
  return Tensor({m * k, 3}, std::move(rel));
}

// Mask that zeroes feature rows of centers with no real neighbor.
inline Tensor empty_group_mask(const NeighborGroup& group, size_t channels) {
  const size_t m = group.center_count();
  std::vector<double> mask(m * channels, 1.0);
  bool any_empty = false;
  for (size_t i = 0; i < m; ++i)
    if (group.valid_count[i] == 0) {
      any_empty = true;
      std::fill(mask.begin() + static_cast<long>(i * channels),
                mask.begin() + static_cast<long>((i + 1) * channels), 0.0);
    }
  if (!any_empty) return Tensor();
  return Tensor({m, channels}, std::move(mask));
}

}  // namespace detail

// Per-point shape feature, rows aligned 1:1 with the original point order.
struct FeatureMatrix {
  Tensor values;  // [points x channels]

  size_t rows() const { return values.rank() == 2 ? values.dim(0) : 0; }
  size_t cols() const { return values.rank() == 2 ? values.dim(1) : 0; }

  void validate(size_t expected_rows, size_t expected_cols) const {
    if (rows() != expected_rows || cols() != expected_cols)
      throw Error::validation("feature matrix is " + std::to_string(rows()) + "x" +
                              std::to_string(cols()) + ", expected " +
                              std::to_string(expected_rows) + "x" + std::to_string(expected_cols));
    for (double v : values.values())
      if (!std::isfinite(v)) throw Error::validation("feature matrix contains non-finite values");
  }
};

inline ParamStore init_pcf_params(const PcfConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamStore store;
  for (size_t s = 0; s < cfg.scales(); ++s)
    detail::init_mlp_params(store, "pcf.s" + std::to_string(s), 3, cfg.mlp_widths[s], rng);
  return store;
}

inline FeatureMatrix pcf_forward(const Cloud& original, const Cloud& concat, const PcfConfig& cfg,
                                 const ParamView& params) {
  cfg.validate();
  const size_t n = original.size();
  if (n == 0) throw Error::argument("pcf_forward: empty original cloud");
  if (concat.size() != 2 * n)
    throw Error::dimension("pcf_forward: concatenated cloud must hold twice the original points");
  if (concat.frame != original.frame)
    throw Error::validation("pcf_forward: clouds are in different frames");

  std::vector<Tensor> per_scale;
  per_scale.reserve(cfg.scales());
  for (size_t s = 0; s < cfg.scales(); ++s) {
    const NeighborGroup group = query_ball(concat, original, cfg.radii[s], cfg.fanouts[s]);
    Tensor rows = detail::group_relative_coords(concat, original, group);
    rows = detail::mlp_forward(std::move(rows), "pcf.s" + std::to_string(s),
                               cfg.mlp_widths[s].size(), params);
    const size_t width = cfg.mlp_widths[s].back();
    Tensor pooled = max_pool_groups(reshape(rows, {n, cfg.fanouts[s], width}));
    if (Tensor mask = detail::empty_group_mask(group, width); !mask.empty())
      pooled = mul(pooled, mask);
    per_scale.push_back(std::move(pooled));
  }
  return FeatureMatrix{concat_cols(per_scale)};
}

// Binary dump: rows u32, cols u32, then row-major f64.
inline void save_feature_matrix(const std::string& path, const FeatureMatrix& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot open for writing: " + path);
  const uint32_t rows = static_cast<uint32_t>(f.rows());
  const uint32_t cols = static_cast<uint32_t>(f.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(f.values.values().data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!out) throw Error::io("write failed: " + path);
}

inline FeatureMatrix load_feature_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open: " + path);
  uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in) throw Error::io("truncated feature matrix: " + path);
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw Error::io("truncated feature matrix: " + path);
  return FeatureMatrix{Tensor({rows, cols}, std::move(data))};
}

}  // namespace pcf

#pragma once

// Grasp prediction network: two multi-scale set-abstraction layers over the
// original points (feature rows appended to relative coordinates), feature
// propagation back to full resolution, a shared trunk and four per-point
// heads (score, width bins, two rotation elements). Includes the training
// objective and an AdamW training loop.

#include <array>
#include <cmath>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"
#include "pcf/gripper.hpp"
#include "pcf/kernels.hpp"
#include "pcf/optim.hpp"
#include "pcf/params.hpp"
#include "pcf/pcf_layer.hpp"
#include "pcf/tensor.hpp"

namespace pcf {

struct SaLayerConfig {
  size_t centroids = 512;
  std::vector<double> radii = {0.04, 0.08, 0.16};
  std::vector<size_t> fanouts = {64, 64, 128};
  std::vector<std::vector<size_t>> mlp_widths = {{32, 32, 64}, {64, 64, 128}, {64, 64, 128}};

  size_t out_channels() const {
    size_t total = 0;
    for (const auto& w : mlp_widths) total += w.back();
    return total;
  }
};

struct NetConfig {
  size_t n_points = 1024;
  std::vector<SaLayerConfig> sa = {
      {512, {0.04, 0.08, 0.16}, {64, 64, 128}, {{32, 32, 64}, {64, 64, 128}, {64, 64, 128}}},
      {128, {0.08, 0.16, 0.32}, {64, 64, 128}, {{64, 64, 128}, {64, 64, 128}, {64, 64, 128}}}};
  std::vector<std::vector<size_t>> fp_widths = {{256, 128}, {128, 128}};
  size_t trunk_width = 128;
  size_t head_hidden = 128;

  double alpha = 1.0;   // score loss weight
  double beta = 10.0;   // pose loss weight
  double gamma = 1.0;   // width loss weight
  size_t topk = 108;    // hard-point count for the score loss
  double lr = 1e-4;
  double weight_decay = 5e-4;
  bool stop_score_grad = false;
  PoseDistance pose_distance = PoseDistance::sum;

  void validate() const {
    if (sa.empty() || fp_widths.size() != sa.size())
      throw Error::validation("net config: need one propagation stage per abstraction layer");
    size_t prev = n_points;
    for (const auto& layer : sa) {
      if (layer.centroids == 0 || layer.centroids > prev)
        throw Error::validation("net config: centroid counts must decrease from n_points");
      if (layer.radii.size() != layer.fanouts.size() ||
          layer.radii.size() != layer.mlp_widths.size() || layer.radii.empty())
        throw Error::validation("net config: per-scale settings must align");
      for (size_t s = 1; s < layer.radii.size(); ++s)
        if (layer.radii[s] <= layer.radii[s - 1])
          throw Error::validation("net config: radii must be strictly increasing");
      prev = layer.centroids;
    }
    if (topk == 0 || topk > n_points)
      throw Error::validation("net config: topk must be in [1, n_points]");
    if (alpha <= 0.0 || beta <= 0.0 || gamma <= 0.0)
      throw Error::validation("net config: loss weights must be positive");
  }
};

// Per-point head outputs, row i aligned with original point i.
struct PerPointPredictions {
  Tensor score;         // [n x 1], in (0,1)
  Tensor width_logits;  // [n x kWidthBins]
  Tensor z1, z2;        // [n x 3]

  size_t count() const { return score.rank() == 2 ? score.dim(0) : 0; }

  struct Record {
    double score;
    std::array<double, kWidthBins> width_logits;
    Vec3 z1, z2;
  };

  Record record(size_t i) const {
    Record r;
    r.score = score.values()[i];
    for (int b = 0; b < kWidthBins; ++b)
      r.width_logits[static_cast<size_t>(b)] = width_logits.values()[i * kWidthBins + b];
    const auto& a = z1.values();
    const auto& bda = z2.values();
    r.z1 = {a[i * 3], a[i * 3 + 1], a[i * 3 + 2]};
    r.z2 = {bda[i * 3], bda[i * 3 + 1], bda[i * 3 + 2]};
    return r;
  }
};

namespace detail {

inline size_t lex_min_index(const Cloud& cloud) {
  size_t best = 0;
  for (size_t i = 1; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const Vec3& q = cloud.points[best];
    if (p.x < q.x || (p.x == q.x && (p.y < q.y || (p.y == q.y && p.z < q.z)))) best = i;
  }
  return best;
}

inline std::vector<size_t> flat_indices(const NeighborGroup& g) {
  std::vector<size_t> out(g.neighbor_idx.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<size_t>(g.neighbor_idx[i]);
  return out;
}

// One multi-scale set-abstraction step: returns centroid cloud + features.
inline std::pair<Cloud, Tensor> sa_forward(const Cloud& points, const Tensor& feats,
                                           const SaLayerConfig& cfg, const std::string& prefix,
                                           const ParamView& params) {
  // Centroid seeding by the lexicographically smallest point keeps the
  // result independent of input ordering.
  const std::vector<int> idx = fps(points, cfg.centroids, lex_min_index(points));
  const Cloud cents = points.subset(idx);
  std::vector<Tensor> per_scale;
  for (size_t s = 0; s < cfg.radii.size(); ++s) {
    const NeighborGroup group = query_ball(points, cents, cfg.radii[s], cfg.fanouts[s]);
    Tensor rel = group_relative_coords(points, cents, group);
    Tensor gathered = gather_rows(feats, flat_indices(group));
    Tensor rows = concat_cols({std::move(rel), std::move(gathered)});
    const std::string scale_prefix = prefix + ".s" + std::to_string(s);
    rows = mlp_forward(std::move(rows), scale_prefix, cfg.mlp_widths[s].size(), params);
    const size_t width = cfg.mlp_widths[s].back();
    Tensor pooled = max_pool_groups(reshape(rows, {cents.size(), cfg.fanouts[s], width}));
    if (Tensor mask = empty_group_mask(group, width); !mask.empty()) pooled = mul(pooled, mask);
    per_scale.push_back(std::move(pooled));
  }
  return {cents, concat_cols(per_scale)};
}

// Inverse-distance k=3 interpolation of coarse features onto fine points.
inline Tensor fp_interpolate(const Cloud& fine, const Cloud& coarse, const Tensor& coarse_feats) {
  const size_t k = std::min<size_t>(3, coarse.size());
  const NeighborGroup nb = knn(coarse, fine, k);
  std::vector<size_t> idx(fine.size() * k);
  std::vector<double> w(fine.size() * k);
  for (size_t i = 0; i < fine.size(); ++i) {
    double total = 0.0;
    for (size_t j = 0; j < k; ++j) {
      const size_t src = static_cast<size_t>(nb.neighbor(i, j));
      const double d = (coarse.points[src] - fine.points[i]).norm();
      idx[i * k + j] = src;
      w[i * k + j] = 1.0 / (d + 1e-12);
      total += w[i * k + j];
    }
    for (size_t j = 0; j < k; ++j) w[i * k + j] /= total;
  }
  return weighted_rows(coarse_feats, idx, w, fine.size());
}

// Two-layer head: relu hidden, linear output.
inline Tensor head_forward(const Tensor& trunk, const std::string& prefix,
                           const ParamView& params) {
  Tensor h = relu(add_bias(matmul(trunk, params.at(prefix + ".l0.W")),
                           params.at(prefix + ".l0.b")));
  return add_bias(matmul(h, params.at(prefix + ".l1.W")), params.at(prefix + ".l1.b"));
}

inline void init_head_params(ParamStore& store, const std::string& prefix, size_t in,
                             size_t hidden, size_t out, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto fill = [&](size_t rows, size_t cols) {
    std::vector<double> w(rows * cols);
    const double s = std::sqrt(2.0 / static_cast<double>(rows));
    for (double& v : w) v = s * n(rng);
    return Tensor({rows, cols}, std::move(w));
  };
  store.add(prefix + ".l0.W", fill(in, hidden));
  store.add(prefix + ".l0.b", Tensor::zeros({hidden}));
  store.add(prefix + ".l1.W", fill(hidden, out));
  store.add(prefix + ".l1.b", Tensor::zeros({out}));
}

}  // namespace detail

// Appends encoder/decoder/head parameters for feature rows of
// `feature_channels` columns.
inline void append_net_params(ParamStore& store, const NetConfig& cfg, size_t feature_channels,
                              Rng& rng) {
  cfg.validate();
  std::vector<size_t> level_channels = {feature_channels};
  for (size_t L = 0; L < cfg.sa.size(); ++L) {
    const auto& layer = cfg.sa[L];
    const size_t in = 3 + level_channels.back();
    for (size_t s = 0; s < layer.mlp_widths.size(); ++s)
      detail::init_mlp_params(store, "net.sa" + std::to_string(L) + ".s" + std::to_string(s), in,
                              layer.mlp_widths[s], rng);
    level_channels.push_back(layer.out_channels());
  }
  size_t carried = level_channels.back();
  for (size_t L = cfg.sa.size(); L-- > 0;) {
    const size_t in = carried + level_channels[L];
    const auto& widths = cfg.fp_widths[cfg.sa.size() - 1 - L];
    detail::init_mlp_params(store, "net.fp" + std::to_string(L), in, widths, rng);
    carried = widths.back();
  }
  detail::init_mlp_params(store, "net.trunk", carried, {cfg.trunk_width}, rng);
  detail::init_head_params(store, "net.head.score", cfg.trunk_width, cfg.head_hidden, 1, rng);
  detail::init_head_params(store, "net.head.width", cfg.trunk_width, cfg.head_hidden, kWidthBins,
                           rng);
  detail::init_head_params(store, "net.head.z1", cfg.trunk_width, cfg.head_hidden, 3, rng);
  detail::init_head_params(store, "net.head.z2", cfg.trunk_width, cfg.head_hidden, 3, rng);
}

inline ParamStore init_pipeline_params(const PcfConfig& pcf_cfg, const NetConfig& net_cfg,
                                       uint64_t seed) {
  Rng rng(seed);
  ParamStore store = init_pcf_params(pcf_cfg, rng);
  append_net_params(store, net_cfg, pcf_cfg.out_channels(), rng);
  return store;
}

inline PerPointPredictions net_forward(const Cloud& original, const Tensor& F,
                                       const NetConfig& cfg, const ParamView& params) {
  cfg.validate();
  if (F.rank() != 2 || F.dim(0) != original.size())
    throw Error::dimension("net_forward: feature rows must align with the original points");

  std::vector<Cloud> level_points = {original};
  std::vector<Tensor> level_feats = {F};
  for (size_t L = 0; L < cfg.sa.size(); ++L) {
    auto [cents, feats] = detail::sa_forward(level_points.back(), level_feats.back(), cfg.sa[L],
                                             "net.sa" + std::to_string(L), params);
    level_points.push_back(std::move(cents));
    level_feats.push_back(std::move(feats));
  }

  Tensor carried = level_feats.back();
  for (size_t L = cfg.sa.size(); L-- > 0;) {
    const Cloud& fine = level_points[L];
    const Cloud& coarse = level_points[L + 1];
    Tensor interp = detail::fp_interpolate(fine, coarse, carried);
    Tensor rows = concat_cols({std::move(interp), level_feats[L]});
    const auto& widths = cfg.fp_widths[cfg.sa.size() - 1 - L];
    carried = detail::mlp_forward(std::move(rows), "net.fp" + std::to_string(L), widths.size(),
                                  params);
  }

  Tensor trunk = detail::mlp_forward(std::move(carried), "net.trunk", 1, params);
  PerPointPredictions pred;
  pred.score = sigmoid(detail::head_forward(trunk, "net.head.score", params));
  pred.width_logits = detail::head_forward(trunk, "net.head.width", params);
  pred.z1 = detail::head_forward(trunk, "net.head.z1", params);
  pred.z2 = detail::head_forward(trunk, "net.head.z2", params);
  return pred;
}

struct DecodedGrasps {
  std::vector<GraspPose> poses;
  std::vector<size_t> point_index;  // original point per pose
  size_t degenerate_count = 0;
};

// Per point: (b,a) from the two rotation elements, width from the argmax
// bin, pose from the contact construction. Degenerate points are dropped.
inline DecodedGrasps decode_grasps(const PerPointPredictions& pred, const Cloud& original,
                                   const GripperModel& gripper) {
  if (pred.count() != original.size())
    throw Error::dimension("decode_grasps: prediction/point count mismatch");
  DecodedGrasps out;
  for (size_t i = 0; i < original.size(); ++i) {
    const auto rec = pred.record(i);
    std::pair<Vec3, Vec3> frame;
    try {
      frame = orthonormalize(rec.z1, rec.z2);
    } catch (const Error&) {
      ++out.degenerate_count;
      continue;
    }
    const auto& logits = rec.width_logits;
    const int bin = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    ContactGrasp g{original.points[i], frame.second, frame.first, bin_to_width(bin, gripper)};
    GraspPose pose = contact_to_pose(g, gripper);
    pose.score = rec.score;
    out.poses.push_back(pose);
    out.point_index.push_back(i);
  }
  return out;
}

// Ground-truth association for one scene's points: per point, the matched
// label (if any), its pose and width, plus the contact position used to
// rebuild predicted poses during training.
struct AssociatedLabels {
  std::vector<Vec3> contacts;      // original points
  std::vector<int> match;          // label index or -1
  std::vector<GraspPose> gt_pose;  // valid where match >= 0
  std::vector<double> gt_width;

  size_t count() const { return match.size(); }
  size_t positive_count() const {
    size_t n = 0;
    for (int m : match) n += m >= 0;
    return n;
  }
};

inline AssociatedLabels associate_scene_labels(const Cloud& original,
                                               const std::vector<LabeledGrasp>& labels,
                                               const GripperModel& gripper,
                                               double radius = 0.002) {
  Cloud label_points;
  label_points.frame = original.frame;
  label_points.points.reserve(labels.size());
  for (const auto& l : labels) label_points.points.push_back(l.grasp.contact);

  std::vector<GraspPose> label_poses(labels.size());
  for (size_t j = 0; j < labels.size(); ++j)
    label_poses[j] = contact_to_pose(labels[j].grasp, gripper);

  const std::vector<LabelMatch> matches = associate_labels(original, label_points, radius);
  AssociatedLabels out;
  out.contacts = original.points;
  out.match.resize(original.size(), -1);
  out.gt_pose.resize(original.size());
  out.gt_width.resize(original.size(), 0.0);
  for (size_t i = 0; i < original.size(); ++i) {
    if (!matches[i].positive) continue;
    out.match[i] = matches[i].label_index;
    out.gt_pose[i] = label_poses[static_cast<size_t>(matches[i].label_index)];
    out.gt_width[i] = labels[static_cast<size_t>(matches[i].label_index)].grasp.width;
  }
  return out;
}

struct LossBreakdown {
  double bce = 0.0;
  double adds = 0.0;
  double width = 0.0;
  double total = 0.0;
  size_t selected = 0;    // points in the hard-point score loss
  size_t positives = 0;   // points with a matched label
  size_t degenerate = 0;  // positives whose rotation decode degenerated
};

namespace detail {

inline Tensor vec3_tensor(const Vec3& v) { return Tensor({3}, {v.x, v.y, v.z}); }

inline Tensor gripper_points_tensor(const GripperModel& g) {
  std::vector<double> data;
  data.reserve(15);
  for (const Vec3& p : g.control_points) {
    data.push_back(p.x);
    data.push_back(p.y);
    data.push_back(p.z);
  }
  return Tensor({5, 3}, std::move(data));
}

inline Tensor control_points_tensor(const GraspPose& pose, const GripperModel& g) {
  const auto pts = control_points_world(pose, g);
  std::vector<double> data;
  data.reserve(15);
  for (const Vec3& p : pts) {
    data.push_back(p.x);
    data.push_back(p.y);
    data.push_back(p.z);
  }
  return Tensor({5, 3}, std::move(data));
}

// Pose distance between the taped predicted control points and a fixed
// ground-truth pose, minimized over the gripper flip.
inline Tensor taped_pose_distance(const Tensor& pred_cp, const GraspPose& gt,
                                  const GripperModel& gripper, PoseDistance mode) {
  const auto branch = [&](const GraspPose& g) {
    Tensor diff = sub(pred_cp, control_points_tensor(g, gripper));
    if (mode == PoseDistance::sum) return sum_all(rowwise_l2(diff));
    return sqrt(sum_all(mul(diff, diff)));
  };
  return min2(branch(gt), branch(flip_about_approach(gt)));
}

}  // namespace detail

// Total objective: hard-point score bce, score-weighted pose distance over
// positives, and multi-label width bce over positives.
inline std::pair<Tensor, LossBreakdown> loss_total(const PerPointPredictions& pred,
                                                   const AssociatedLabels& labels,
                                                   const NetConfig& cfg,
                                                   const GripperModel& gripper) {
  const size_t n = pred.count();
  if (labels.count() != n)
    throw Error::dimension("loss_total: label records do not match prediction count");

  LossBreakdown bd;

  // Hard-point selection by absolute score error, ties to lowest index.
  const auto& sv = pred.score.values();
  std::vector<double> target(n);
  std::vector<size_t> order(n);
  std::vector<double> err(n);
  for (size_t i = 0; i < n; ++i) {
    target[i] = labels.match[i] >= 0 ? 1.0 : 0.0;
    err[i] = std::abs(sv[i] - target[i]);
    order[i] = i;
  }
  const size_t k = std::min(cfg.topk, n);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return err[a] > err[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  bd.selected = k;

  std::vector<double> sel_target(k);
  for (size_t j = 0; j < k; ++j) sel_target[j] = target[order[j]];
  Tensor l_bce = bce(gather_rows(pred.score, order), Tensor({k, 1}, std::move(sel_target)),
                     Reduction::mean);

  // Score-weighted pose distance over positives.
  const Tensor gripper_points = detail::gripper_points_tensor(gripper);
  Tensor adds_acc = Tensor::scalar(0.0);
  size_t valid_pos = 0;
  std::vector<size_t> pos_idx;
  for (size_t i = 0; i < n; ++i) {
    if (labels.match[i] < 0) continue;
    ++bd.positives;
    pos_idx.push_back(i);

    const auto rec = pred.record(i);
    const double n1 = rec.z1.norm();
    const Vec3 b_plain = n1 > 1e-9 ? rec.z1 / n1 : Vec3{};
    const double nr = (rec.z2 - b_plain * b_plain.dot(rec.z2)).norm();
    if (n1 <= 1e-9 || nr <= 1e-6 * rec.z2.norm() || nr <= 1e-12) {
      ++bd.degenerate;
      continue;
    }
    ++valid_pos;

    Tensor z1 = reshape(gather_rows(pred.z1, {i}), {3});
    Tensor z2 = reshape(gather_rows(pred.z2, {i}), {3});
    Tensor b_hat = div(z1, sqrt(sum_all(mul(z1, z1))));
    Tensor resid = sub(z2, mul(b_hat, sum_all(mul(b_hat, z2))));
    Tensor a_hat = div(resid, sqrt(sum_all(mul(resid, resid))));
    Tensor axb = cross3(a_hat, b_hat);

    const auto& logits = rec.width_logits;
    const int bin = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    const double w = bin_to_width(bin, gripper);

    Tensor t = add(add(detail::vec3_tensor(labels.contacts[i]), scale(b_hat, w / 2.0)),
                   scale(a_hat, gripper.baseline_offset));
    Tensor rt = concat_rows({reshape(b_hat, {1, 3}), reshape(axb, {1, 3}),
                             reshape(a_hat, {1, 3})});
    Tensor pred_cp = add_bias(matmul(gripper_points, rt), t);
    Tensor dist = detail::taped_pose_distance(pred_cp, labels.gt_pose[i], gripper,
                                              cfg.pose_distance);

    Tensor s_i = reshape(gather_rows(pred.score, {i}), {1});
    if (cfg.stop_score_grad) s_i = Tensor::scalar(s_i.value());
    adds_acc = add(adds_acc, mul(s_i, dist));
  }

  Tensor l_adds =
      valid_pos > 0 ? scale(adds_acc, 1.0 / static_cast<double>(valid_pos)) : Tensor::scalar(0.0);

  // Multi-label width bce over positives.
  Tensor l_width = Tensor::scalar(0.0);
  if (!pos_idx.empty()) {
    std::vector<double> onehot(pos_idx.size() * kWidthBins, 0.0);
    for (size_t j = 0; j < pos_idx.size(); ++j) {
      const int bin = width_to_bin(labels.gt_width[pos_idx[j]], gripper);
      onehot[j * kWidthBins + static_cast<size_t>(bin)] = 1.0;
    }
    l_width = bce(sigmoid(gather_rows(pred.width_logits, pos_idx)),
                  Tensor({pos_idx.size(), kWidthBins}, std::move(onehot)), Reduction::mean);
  } else {
    std::cerr << "warning: no positive contacts in scene; pose and width losses contribute 0\n";
  }

  Tensor total =
      add(add(scale(l_bce, cfg.alpha), scale(l_adds, cfg.beta)), scale(l_width, cfg.gamma));
  bd.bce = l_bce.value();
  bd.adds = l_adds.value();
  bd.width = l_width.value();
  bd.total = total.value();
  return {std::move(total), bd};
}

// One scene prepared for training: sampled original points, their completion,
// and associated ground truth.
struct TrainScene {
  std::string id;
  Cloud original;
  Cloud completion;
  AssociatedLabels labels;
};

struct Trainer {
  PcfConfig pcf;
  NetConfig net;
  GripperModel gripper;
  ParamStore params;
  AdamW opt;

  static Trainer make(const PcfConfig& pcf_cfg, const NetConfig& net_cfg,
                      const GripperModel& gripper, uint64_t seed) {
    Trainer t;
    t.pcf = pcf_cfg;
    t.net = net_cfg;
    t.gripper = gripper;
    t.params = init_pipeline_params(pcf_cfg, net_cfg, seed);
    t.opt = AdamW({net_cfg.lr, 0.9, 0.999, 1e-8, net_cfg.weight_decay});
    return t;
  }
};

// Forward + loss + backward over the batch, then one AdamW step. Returns the
// batch-mean loss breakdown.
inline LossBreakdown train_step(Trainer& trainer, std::span<const TrainScene> batch) {
  if (batch.empty()) throw Error::argument("train_step: empty batch");
  std::map<std::string, std::vector<double>> grad_sum;
  LossBreakdown mean;
  for (const TrainScene& scene : batch) {
    Tape tape;
    WatchedParams watched = watch(tape, trainer.params);
    const ParamView view = watched.view();
    const FeatureMatrix F =
        pcf_forward(scene.original, concat_points(scene.original, scene.completion), trainer.pcf,
                    view);
    const PerPointPredictions pred = net_forward(scene.original, F.values, trainer.net, view);
    auto [loss, bd] = loss_total(pred, scene.labels, trainer.net, trainer.gripper);
    if (!std::isfinite(bd.total))
      throw Error::training("non-finite loss on scene '" + scene.id + "'");
    tape.backward(loss);
    for (auto& [name, g] : watched.grads()) {
      auto it = grad_sum.find(name);
      if (it == grad_sum.end())
        grad_sum.emplace(name, std::move(g));
      else
        for (size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
    mean.bce += bd.bce;
    mean.adds += bd.adds;
    mean.width += bd.width;
    mean.total += bd.total;
    mean.selected += bd.selected;
    mean.positives += bd.positives;
    mean.degenerate += bd.degenerate;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& [name, g] : grad_sum)
    for (double& v : g) v *= inv;
  mean.bce *= inv;
  mean.adds *= inv;
  mean.width *= inv;
  mean.total *= inv;
  trainer.opt.step(trainer.params, grad_sum);
  return mean;
}

}  // namespace pcf

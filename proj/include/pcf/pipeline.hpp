#pragma once

// Glue for the end-to-end flow: scene -> view -> sampled original points ->
// completion -> features -> predictions -> proposals.

#include <string>

#include "pcf/cloud.hpp"
#include "pcf/completion.hpp"
#include "pcf/grasp_net.hpp"
#include "pcf/kernels.hpp"
#include "pcf/pcf_layer.hpp"
#include "pcf/scene.hpp"
#include "pcf/score_filter.hpp"

namespace pcf {

struct PipelineConfig {
  uint64_t seed = 7;
  size_t n_points = 1024;
  size_t fps_start = 0;
  PcfConfig pcf;
  NetConfig net;
  GripperModel gripper;
  EvalThresholds eval;
};

// Reduced configuration sized for CPU training runs: same radii and loss
// constants as the full profile, fewer points, smaller fan-outs and widths.
inline PipelineConfig mini_pipeline_config() {
  PipelineConfig cfg;
  cfg.n_points = 256;
  cfg.pcf.fanouts = {16, 16, 32};
  cfg.pcf.mlp_widths = {{16, 16, 32}, {32, 32, 64}, {32, 32, 64}};
  cfg.net.n_points = 256;
  cfg.net.sa = {{64,
                 {0.04, 0.08, 0.16},
                 {16, 16, 32},
                 {{16, 16, 32}, {32, 32, 64}, {32, 32, 64}}},
                {16,
                 {0.08, 0.16, 0.32},
                 {8, 8, 16},
                 {{32, 32, 64}, {32, 32, 64}, {32, 32, 64}}}};
  cfg.net.fp_widths = {{128, 64}, {64, 64}};
  cfg.net.trunk_width = 64;
  cfg.net.head_hidden = 64;
  return cfg;
}

// Viewing direction for a camera-frame cloud: from the camera origin toward
// the cloud centroid.
inline Vec3 camera_view_dir(const Cloud& cloud) {
  const Vec3 c = cloud.centroid();
  const double n = c.norm();
  return n > 1e-9 ? c / n : Vec3{0.0, 0.0, 1.0};
}

// FPS-downsamples a rendered view to the configured point count.
inline Cloud sample_original_points(const Cloud& view_cloud, size_t n_points, size_t fps_start) {
  if (view_cloud.size() < n_points)
    throw Error::validation("view cloud has " + std::to_string(view_cloud.size()) +
                            " points, need at least " + std::to_string(n_points));
  return view_cloud.subset(fps(view_cloud, n_points, fps_start));
}

// Builds one training scene record from a world-frame scene and a view.
inline TrainScene prepare_train_scene(const Scene& scene, const ViewSpec& view,
                                      const PipelineConfig& cfg, CompletionProvider& provider,
                                      Rng& rng, const std::string& id = "scene") {
  const Cloud view_cloud = render_view(scene, view, rng);
  Cloud original = sample_original_points(view_cloud, cfg.n_points, cfg.fps_start);
  original.normals.clear();

  CompletionRequest req{original, camera_view_dir(original), cfg.n_points};
  Cloud completion = provider.complete(req);

  // Labels move from the world frame into the camera frame of the view.
  const Rigid world_to_cam = view.camera_to_world.inverse();
  std::vector<LabeledGrasp> cam_labels;
  cam_labels.reserve(scene.labels.size());
  for (const auto& l : scene.labels)
    cam_labels.push_back({transform_contact(world_to_cam, l.grasp), l.quality});

  TrainScene out;
  out.id = id;
  out.original = std::move(original);
  out.completion = std::move(completion);
  out.labels = associate_scene_labels(out.original, cam_labels, cfg.gripper);
  return out;
}

// Frozen-parameter proposal pass over a camera-frame cloud.
inline DecodedGrasps propose_grasps(const Cloud& view_cloud, const PipelineConfig& cfg,
                                    const ParamStore& params, CompletionProvider& provider) {
  Cloud original = sample_original_points(view_cloud, cfg.n_points, cfg.fps_start);
  original.normals.clear();
  CompletionRequest req{original, camera_view_dir(original), cfg.n_points};
  const Cloud completion = provider.complete(req);
  const ParamView view(params);
  const FeatureMatrix F =
      pcf_forward(original, concat_points(original, completion), cfg.pcf, view);
  const PerPointPredictions pred = net_forward(original, F.values, cfg.net, view);
  return decode_grasps(pred, original, cfg.gripper);
}

// Robot frame that matches a rendered view when the world frame is the robot
// base frame.
inline RobotFrame robot_frame_from_view(const ViewSpec& view) {
  RobotFrame f;
  f.camera_to_robot = view.camera_to_world.R;
  f.origin = -view.camera_to_world.t;
  f.z_axis = {0.0, 0.0, 1.0};
  return f;
}

// Camera circling the scene center at a given distance/elevation, looking at
// the target point. +z looks forward, +x right, +y down.
inline ViewSpec make_orbit_view(const Vec3& target, double distance, double azimuth,
                                double elevation, int resolution = 240) {
  ViewSpec v;
  v.width = resolution;
  v.height = resolution;
  v.focal = resolution;
  v.cx = resolution / 2.0;
  v.cy = resolution / 2.0;
  const Vec3 offset = {distance * std::cos(elevation) * std::cos(azimuth),
                       distance * std::cos(elevation) * std::sin(azimuth),
                       distance * std::sin(elevation)};
  const Vec3 eye = target + offset;
  const Vec3 forward = (target - eye).normalized();
  Vec3 up = {0.0, 0.0, 1.0};
  if (std::abs(forward.dot(up)) > 0.999) up = {1.0, 0.0, 0.0};
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right).normalized();
  v.camera_to_world.R = Mat3::from_cols(right, down, forward);
  v.camera_to_world.t = eye;
  return v;
}

}  // namespace pcf

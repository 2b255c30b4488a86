#pragma once

// Synthetic desk scenes: primitive meshes, uniform surface sampling, a
// z-buffer single-view renderer, antipodal grasp labeling and proposal
// evaluation. The world frame doubles as the robot frame; rendered clouds are
// in the camera frame.

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"
#include "pcf/geom.hpp"
#include "pcf/gripper.hpp"
#include "pcf/random.hpp"

namespace pcf {

struct Primitive {
  enum class Kind { box, cylinder, sphere };
  Kind kind = Kind::box;
  std::vector<double> params;  // box: sx sy sz; cylinder: radius height; sphere: radius
  Rigid pose;
};

inline const char* primitive_kind_name(Primitive::Kind k) {
  switch (k) {
    case Primitive::Kind::box: return "box";
    case Primitive::Kind::cylinder: return "cylinder";
    default: return "sphere";
  }
}

struct Scene {
  std::vector<Primitive> objects;
  std::vector<LabeledGrasp> labels;
};

struct ViewSpec {
  Rigid camera_to_world;
  double focal = 240.0;  // pixels
  double cx = 120.0, cy = 120.0;
  int width = 240, height = 240;
  double near = 0.05, far = 10.0;

  void validate() const {
    if (focal <= 0.0) throw Error::validation("view: focal length must be positive");
    if (width < 16 || height < 16) throw Error::validation("view: resolution below 16x16");
    if (near <= 0.0 || far <= near) throw Error::validation("view: bad near/far planes");
  }

  // Unit viewing direction (+z of the camera) in world coordinates.
  Vec3 view_dir_world() const { return camera_to_world.R.col(2); }
};

namespace detail {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;  // outward CCW winding
};

inline void add_quad(TriMesh& m, int a, int b, int c, int d) {
  m.triangles.push_back({a, b, c});
  m.triangles.push_back({a, c, d});
}

inline TriMesh box_mesh(double sx, double sy, double sz) {
  TriMesh m;
  const double x = sx / 2, y = sy / 2, z = sz / 2;
  m.vertices = {{-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
                {-x, -y, z},  {x, -y, z},  {x, y, z},  {-x, y, z}};
  add_quad(m, 0, 3, 2, 1);  // -z
  add_quad(m, 4, 5, 6, 7);  // +z
  add_quad(m, 0, 1, 5, 4);  // -y
  add_quad(m, 2, 3, 7, 6);  // +y
  add_quad(m, 1, 2, 6, 5);  // +x
  add_quad(m, 3, 0, 4, 7);  // -x
  return m;
}

inline TriMesh cylinder_mesh(double radius, double height, int segments = 48) {
  TriMesh m;
  const double hz = height / 2;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    m.vertices.push_back({radius * std::cos(a), radius * std::sin(a), -hz});
    m.vertices.push_back({radius * std::cos(a), radius * std::sin(a), hz});
  }
  const int bottom_center = static_cast<int>(m.vertices.size());
  m.vertices.push_back({0, 0, -hz});
  const int top_center = bottom_center + 1;
  m.vertices.push_back({0, 0, hz});
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    add_quad(m, 2 * i, 2 * j, 2 * j + 1, 2 * i + 1);       // side, outward
    m.triangles.push_back({bottom_center, 2 * j, 2 * i});  // -z cap
    m.triangles.push_back({top_center, 2 * i + 1, 2 * j + 1});
  }
  return m;
}

inline TriMesh sphere_mesh(double radius, int stacks = 24, int slices = 48) {
  TriMesh m;
  for (int st = 0; st <= stacks; ++st) {
    const double phi = std::numbers::pi * st / stacks;
    for (int sl = 0; sl < slices; ++sl) {
      const double theta = 2.0 * std::numbers::pi * sl / slices;
      m.vertices.push_back({radius * std::sin(phi) * std::cos(theta),
                            radius * std::sin(phi) * std::sin(theta), radius * std::cos(phi)});
    }
  }
  const auto vid = [&](int st, int sl) { return st * slices + (sl % slices); };
  for (int st = 0; st < stacks; ++st)
    for (int sl = 0; sl < slices; ++sl) {
      // +z at phi=0; outward winding
      m.triangles.push_back({vid(st, sl), vid(st, sl + 1), vid(st + 1, sl + 1)});
      m.triangles.push_back({vid(st, sl), vid(st + 1, sl + 1), vid(st + 1, sl)});
    }
  return m;
}

inline TriMesh primitive_mesh(const Primitive& p) {
  switch (p.kind) {
    case Primitive::Kind::box:
      if (p.params.size() != 3) throw Error::validation("box needs sx sy sz");
      return box_mesh(p.params[0], p.params[1], p.params[2]);
    case Primitive::Kind::cylinder:
      if (p.params.size() != 2) throw Error::validation("cylinder needs radius height");
      return cylinder_mesh(p.params[0], p.params[1]);
    default:
      if (p.params.size() != 1) throw Error::validation("sphere needs radius");
      return sphere_mesh(p.params[0]);
  }
}

struct WorldTriangles {
  std::vector<std::array<Vec3, 3>> tris;
  std::vector<Vec3> normals;
  std::vector<double> cum_area;  // cumulative areas for sampling
  double total_area = 0.0;
};

inline WorldTriangles scene_triangles(const Scene& scene) {
  WorldTriangles out;
  for (const Primitive& p : scene.objects) {
    const TriMesh mesh = primitive_mesh(p);
    for (const auto& t : mesh.triangles) {
      const Vec3 a = p.pose.apply(mesh.vertices[static_cast<size_t>(t[0])]);
      const Vec3 b = p.pose.apply(mesh.vertices[static_cast<size_t>(t[1])]);
      const Vec3 c = p.pose.apply(mesh.vertices[static_cast<size_t>(t[2])]);
      const Vec3 cr = (b - a).cross(c - a);
      const double area = 0.5 * cr.norm();
      if (area <= 0.0) continue;
      out.tris.push_back({a, b, c});
      out.normals.push_back(cr / cr.norm());
      out.total_area += area;
      out.cum_area.push_back(out.total_area);
    }
  }
  return out;
}

}  // namespace detail

// Area-weighted uniform sampling over all object surfaces; face normals.
inline Cloud sample_surface(const Scene& scene, size_t n, Rng& rng) {
  if (scene.objects.empty()) throw Error::argument("sample_surface: empty scene");
  if (n == 0) throw Error::argument("sample_surface: need at least one sample");
  const detail::WorldTriangles wt = detail::scene_triangles(scene);
  if (wt.tris.empty()) throw Error::argument("sample_surface: scene has no surface area");
  Cloud out;
  out.frame = Frame::robot;  // world == robot base frame
  out.points.reserve(n);
  out.normals.reserve(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (size_t i = 0; i < n; ++i) {
    const double pick = u(rng) * wt.total_area;
    const size_t t = static_cast<size_t>(
        std::lower_bound(wt.cum_area.begin(), wt.cum_area.end(), pick) - wt.cum_area.begin());
    const auto& tri = wt.tris[std::min(t, wt.tris.size() - 1)];
    const double r1 = std::sqrt(u(rng)), r2 = u(rng);
    const Vec3 p =
        tri[0] * (1.0 - r1) + tri[1] * (r1 * (1.0 - r2)) + tri[2] * (r1 * r2);
    out.points.push_back(p);
    out.normals.push_back(wt.normals[std::min(t, wt.tris.size() - 1)]);
  }
  return out;
}

// Pinhole z-buffer over densely sampled surface points; keeps the nearest
// sample per pixel and returns those samples in the camera frame. The output
// is always a subset of the projected samples.
inline Cloud render_view(const Scene& scene, const ViewSpec& view, Rng& rng,
                         size_t dense_samples = 0) {
  view.validate();
  if (dense_samples == 0)
    dense_samples = static_cast<size_t>(view.width) * static_cast<size_t>(view.height) * 4;
  const Cloud surface = sample_surface(scene, dense_samples, rng);
  const Rigid world_to_cam = view.camera_to_world.inverse();

  const size_t pixels = static_cast<size_t>(view.width) * static_cast<size_t>(view.height);
  std::vector<double> depth(pixels, std::numeric_limits<double>::infinity());
  std::vector<int64_t> winner(pixels, -1);
  std::vector<Vec3> cam_points(surface.size());
  for (size_t i = 0; i < surface.size(); ++i) {
    const Vec3 q = world_to_cam.apply(surface.points[i]);
    cam_points[i] = q;
    if (q.z < view.near || q.z > view.far) continue;
    const int px = static_cast<int>(std::floor(view.focal * q.x / q.z + view.cx));
    const int py = static_cast<int>(std::floor(view.focal * q.y / q.z + view.cy));
    if (px < 0 || px >= view.width || py < 0 || py >= view.height) continue;
    const size_t pix = static_cast<size_t>(py) * static_cast<size_t>(view.width) +
                       static_cast<size_t>(px);
    if (q.z < depth[pix]) {
      depth[pix] = q.z;
      winner[pix] = static_cast<int64_t>(i);
    }
  }

  Cloud out;
  out.frame = Frame::camera;
  for (size_t pix = 0; pix < pixels; ++pix) {
    if (winner[pix] < 0) continue;
    const size_t i = static_cast<size_t>(winner[pix]);
    out.points.push_back(cam_points[i]);
    out.normals.push_back(world_to_cam.rotate(surface.normals[i]));
  }
  if (out.points.empty()) std::cerr << "warning: rendered view contains no visible points\n";
  return out;
}

// Rejection-samples antipodal contact pairs: separation within the gripper
// opening, both contact normals inside the friction cone around the closing
// line. Quality is the cosine of the normal misalignment. The approach is the
// outward-biased perpendicular of the closing line.
inline std::vector<LabeledGrasp> gen_antipodal_labels(const Scene& scene, size_t count,
                                                      double friction_half_angle, Rng& rng,
                                                      const GripperModel& gripper) {
  if (friction_half_angle <= 0.0 || friction_half_angle > std::numbers::pi / 4.0)
    throw Error::argument("gen_antipodal_labels: friction half-angle must be in (0, 45] degrees");
  if (count == 0) return {};
  const size_t pool_size = std::max<size_t>(4096, count * 8);
  const Cloud pool = sample_surface(scene, pool_size, rng);
  const Vec3 center = pool.centroid();
  const double cos_f = std::cos(friction_half_angle);

  std::vector<LabeledGrasp> labels;
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  const size_t budget = count * 400;
  for (size_t attempt = 0; attempt < budget && labels.size() < count; ++attempt) {
    const size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const Vec3 span = pool.points[j] - pool.points[i];
    const double w = span.norm();
    if (w < 1e-5 || w > gripper.max_width) continue;
    const Vec3 b = span / w;
    if (pool.normals[i].dot(-b) < cos_f || pool.normals[j].dot(b) < cos_f) continue;

    const Vec3 mid = (pool.points[i] + pool.points[j]) * 0.5;
    Vec3 ref = mid - center;
    Vec3 a = ref - b * ref.dot(b);
    if (a.norm() < 1e-9) {
      ref = {0.0, 0.0, 1.0};
      a = ref - b * ref.dot(b);
      if (a.norm() < 1e-9) a = b.cross(Vec3{1.0, 0.0, 0.0});
    }
    a = a / a.norm();

    const double quality = std::clamp(-pool.normals[i].dot(pool.normals[j]), 0.0, 1.0);
    labels.push_back({ContactGrasp{pool.points[i], a, b, w}, quality});
  }
  if (labels.empty()) std::cerr << "warning: antipodal sampling produced no labels\n";
  return labels;
}

struct EvalThresholds {
  double translation = 0.02;  // m
  double rotation_deg = 15.0;
  size_t k = 20;
};

struct EvalMetrics {
  double precision_at_k = 0.0;
  double coverage = 0.0;
  double collision_rate = 0.0;
  size_t proposals = 0;
  size_t labels = 0;
  size_t matched_topk = 0;
  size_t matched_labels = 0;
};

// Proposal quality against ground-truth labels: precision over the k highest
// scored proposals, label coverage over all proposals, collision rate against
// the observed cloud. Proposals and labels must share one frame.
inline EvalMetrics evaluate(std::span<const GraspPose> proposals,
                            std::span<const LabeledGrasp> labels, const Cloud& cloud,
                            const EvalThresholds& thresholds, const GripperModel& gripper) {
  EvalMetrics m;
  m.proposals = proposals.size();
  m.labels = labels.size();
  if (proposals.empty()) {
    std::cerr << "warning: no proposals to evaluate\n";
    return m;
  }
  std::vector<GraspPose> label_poses(labels.size());
  for (size_t j = 0; j < labels.size(); ++j)
    label_poses[j] = contact_to_pose(labels[j].grasp, gripper);

  const double max_angle = thresholds.rotation_deg * std::numbers::pi / 180.0;
  const auto matches = [&](const GraspPose& p, const GraspPose& l) {
    if ((p.t - l.t).norm() > thresholds.translation) return false;
    const double angle =
        std::min(rotation_angle(p.R, l.R), rotation_angle(p.R, flip_about_approach(l).R));
    return angle <= max_angle;
  };

  std::vector<size_t> order(proposals.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return proposals[a].score > proposals[b].score;
  });

  std::vector<bool> label_hit(labels.size(), false);
  size_t collisions = 0;
  for (size_t i = 0; i < proposals.size(); ++i) {
    for (size_t j = 0; j < label_poses.size(); ++j)
      if (matches(proposals[i], label_poses[j])) label_hit[j] = true;
    if (gripper_collides(proposals[i], cloud, gripper)) ++collisions;
  }
  const size_t k = std::min(thresholds.k, proposals.size());
  for (size_t r = 0; r < k; ++r) {
    const GraspPose& p = proposals[order[r]];
    for (const auto& l : label_poses)
      if (matches(p, l)) {
        ++m.matched_topk;
        break;
      }
  }
  m.matched_labels = static_cast<size_t>(std::count(label_hit.begin(), label_hit.end(), true));
  m.precision_at_k = k > 0 ? static_cast<double>(m.matched_topk) / static_cast<double>(k) : 0.0;
  m.coverage = labels.empty()
                   ? 0.0
                   : static_cast<double>(m.matched_labels) / static_cast<double>(labels.size());
  m.collision_rate = static_cast<double>(collisions) / static_cast<double>(proposals.size());
  return m;
}

}  // namespace pcf

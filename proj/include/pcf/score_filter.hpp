#pragma once

// Re-ranks network grasp scores by how well the approach direction lines up
// with the robot-to-grasp direction, both projected into the robot base
// plane: s_d = sigmoid(A . a), final score S = s_d * s_hat.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "pcf/errors.hpp"
#include "pcf/geom.hpp"
#include "pcf/gripper.hpp"

namespace pcf {

struct RobotFrame {
  Vec3 origin;                         // robot base position, robot frame
  Vec3 z_axis = {0.0, 0.0, 1.0};       // base plane normal, unit
  Mat3 camera_to_robot;                // R_cr

  void validate() const {
    if (std::abs(z_axis.norm() - 1.0) > 1e-9)
      throw Error::validation("robot frame: z axis must be unit length");
    if (!camera_to_robot.is_rotation(1e-9))
      throw Error::validation("robot frame: camera-to-robot must be a rotation");
  }
};

struct PlaneProjection {
  bool degenerate = false;
  Vec3 dir;  // unit vector in the base plane when not degenerate
};

// Removes the z-axis component and normalizes; vectors (near) parallel to
// the axis are degenerate values, not errors.
inline PlaneProjection project_to_base_plane(const Vec3& v, const RobotFrame& frame) {
  const Vec3 in_plane = v - frame.z_axis * v.dot(frame.z_axis);
  const double n = in_plane.norm();
  if (n < 1e-6) return {true, {}};
  return {false, in_plane / n};
}

// Direction score for a grasp expressed in the camera frame. Degenerate
// projections (grasp straight above the base, or approach parallel to the
// base axis) score a neutral 0.5.
inline double direction_score(const GraspPose& grasp, const RobotFrame& frame) {
  frame.validate();
  const Vec3 grasp_origin = frame.camera_to_robot * grasp.t;
  const PlaneProjection to_grasp = project_to_base_plane(grasp_origin - frame.origin, frame);
  const PlaneProjection approach =
      project_to_base_plane(frame.camera_to_robot * grasp.approach_dir(), frame);
  if (to_grasp.degenerate || approach.degenerate) return 0.5;
  const double cosine = to_grasp.dir.dot(approach.dir);
  return 1.0 / (1.0 + std::exp(-cosine));
}

struct FilteredGrasp {
  GraspPose pose;          // pose.score keeps the network score
  double direction = 0.5;  // s_d
  double filtered = 0.0;   // S = s_d * score
};

// Stable descending sort by the filtered score.
inline std::vector<FilteredGrasp> apply_filter(std::span<const GraspPose> grasps,
                                               const RobotFrame& frame) {
  std::vector<FilteredGrasp> out;
  out.reserve(grasps.size());
  for (const GraspPose& g : grasps) {
    const double sd = direction_score(g, frame);
    out.push_back({g, sd, sd * g.score});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FilteredGrasp& a, const FilteredGrasp& b) {
                     return a.filtered > b.filtered;
                   });
  return out;
}

}  // namespace pcf

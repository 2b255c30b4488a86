#pragma once

// Contact-parameterized grasps for a parallel-jaw gripper and their SE(3)
// realization. A grasp frame has the baseline vector b as column 0, a x b as
// column 1 and the approach vector a as column 2 of its rotation; the
// translation is t = c + (w/2) b + d a. Both finger contacts therefore sit at
// z = -d in the grasp frame, at x = -w/2 and +w/2.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pcf/cloud.hpp"
#include "pcf/errors.hpp"
#include "pcf/geom.hpp"

namespace pcf {

inline constexpr int kWidthBins = 10;

struct GripperModel {
  double baseline_offset = 0.10;  // distance from the finger baseline to the gripper base (m)
  double max_width = 0.08;        // maximum opening (m)
  double finger_length = 0.046;
  double finger_thickness = 0.010;
  double finger_height = 0.020;
  std::array<Vec3, 5> control_points;

  GripperModel() { control_points = default_control_points(); }

  GripperModel(double d, double w_max, double finger_len = 0.046)
      : baseline_offset(d), max_width(w_max), finger_length(finger_len) {
    control_points = default_control_points();
  }

  // Base point at the origin, shoulder pair at depth d, fingertip pair at
  // depth d + finger_length, all along the approach axis.
  std::array<Vec3, 5> default_control_points() const {
    const double hw = max_width / 2.0;
    return {Vec3{0, 0, 0}, Vec3{-hw, 0, baseline_offset}, Vec3{hw, 0, baseline_offset},
            Vec3{-hw, 0, baseline_offset + finger_length},
            Vec3{hw, 0, baseline_offset + finger_length}};
  }

  void validate() const {
    if (baseline_offset <= 0.0) throw Error::validation("gripper: baseline offset must be > 0");
    if (max_width <= 0.0) throw Error::validation("gripper: max width must be > 0");
  }
};

struct ContactGrasp {
  Vec3 contact;   // c, on the object surface (m)
  Vec3 approach;  // a, unit
  Vec3 baseline;  // b, unit
  double width = 0.0;

  void validate(const GripperModel& gripper) const {
    if (std::abs(approach.norm() - 1.0) > 1e-9 || std::abs(baseline.norm() - 1.0) > 1e-9)
      throw Error::validation("contact grasp: approach/baseline must be unit vectors");
    if (std::abs(approach.dot(baseline)) >= 1e-6)
      throw Error::validation("contact grasp: approach and baseline must be orthogonal");
    if (width < 0.0 || width > gripper.max_width + 1e-12)
      throw Error::validation("contact grasp: width outside [0, w_max]");
  }
};

struct GraspPose {
  Mat3 R;
  Vec3 t;
  double width = 0.0;
  double score = 0.0;

  Vec3 baseline_dir() const { return R.col(0); }
  Vec3 approach_dir() const { return R.col(2); }

  void validate() const {
    if (!R.is_rotation(1e-9)) throw Error::validation("grasp pose: R is not a rotation");
  }
};

// A ground-truth grasp with its annotation quality in [0, 1].
struct LabeledGrasp {
  ContactGrasp grasp;
  double quality = 1.0;
};

// b_hat = z1/|z1|; a_hat = normalized Gram-Schmidt residual of z2 against
// b_hat. Near-zero or near-parallel inputs are degenerate.
inline std::pair<Vec3, Vec3> orthonormalize(const Vec3& z1, const Vec3& z2) {
  const double n1 = z1.norm();
  if (n1 <= 1e-9) throw Error::degenerate_rotation("orthonormalize: first direction is near zero");
  const Vec3 b = z1 / n1;
  const Vec3 resid = z2 - b * b.dot(z2);
  const double nr = resid.norm();
  // |resid| = |z2| sin(angle); reject angles at or below ~1e-6 rad
  if (nr <= 1e-6 * z2.norm() || nr <= 1e-12)
    throw Error::degenerate_rotation("orthonormalize: directions are near parallel");
  return {b, resid / nr};
}

inline GraspPose contact_to_pose(const ContactGrasp& g, const GripperModel& gripper) {
  g.validate(gripper);
  GraspPose pose;
  pose.R = Mat3::from_cols(g.baseline, g.approach.cross(g.baseline), g.approach);
  pose.t = g.contact + g.baseline * (g.width / 2.0) + g.approach * gripper.baseline_offset;
  pose.width = g.width;
  return pose;
}

// Gripper-frame control points mapped to the world: v R^T + t.
inline std::array<Vec3, 5> control_points_world(const GraspPose& pose,
                                                const GripperModel& gripper) {
  std::array<Vec3, 5> out;
  for (size_t i = 0; i < 5; ++i) out[i] = pose.R * gripper.control_points[i] + pose.t;
  return out;
}

// 180 degree rotation about the pose's own approach axis: swaps the fingers.
inline GraspPose flip_about_approach(const GraspPose& pose) {
  GraspPose f = pose;
  f.R = Mat3::from_cols(-pose.R.col(0), -pose.R.col(1), pose.R.col(2));
  return f;
}

enum class PoseDistance { sum, stacked };

// Control-point distance between two poses, minimized over the gripper's
// 180-degree symmetry of the ground truth. `sum` totals per-point Euclidean
// distances; `stacked` is the norm over all 15 stacked coordinates.
inline double adds_distance(const GraspPose& pred, const GraspPose& gt,
                            const GripperModel& gripper,
                            PoseDistance mode = PoseDistance::sum) {
  const std::array<Vec3, 5> vp = control_points_world(pred, gripper);
  const auto dist_to = [&](const GraspPose& g) {
    const std::array<Vec3, 5> vg = control_points_world(g, gripper);
    double acc = 0.0;
    for (size_t i = 0; i < 5; ++i) {
      const double d2 = (vp[i] - vg[i]).squared_norm();
      acc += mode == PoseDistance::sum ? std::sqrt(d2) : d2;
    }
    return mode == PoseDistance::sum ? acc : std::sqrt(acc);
  };
  return std::min(dist_to(gt), dist_to(flip_about_approach(gt)));
}

inline int width_to_bin(double w, const GripperModel& gripper) {
  if (w < 0.0 || w > gripper.max_width)
    throw Error::validation("width " + std::to_string(w) + " outside [0, " +
                            std::to_string(gripper.max_width) + "]");
  const double step = gripper.max_width / kWidthBins;
  const int bin = static_cast<int>(std::floor(w / step));
  return std::min(bin, kWidthBins - 1);
}

inline double bin_to_width(int bin, const GripperModel& gripper) {
  if (bin < 0 || bin >= kWidthBins) throw Error::validation("width bin out of range");
  return (bin + 0.5) * gripper.max_width / kWidthBins;
}

// Coarse three-box collision model in the grasp frame: two finger boxes
// flanking the opening corridor of width w, and a back plate between the
// finger roots and the gripper base. The fingertip plane is z = -d.
inline bool gripper_collides(const GraspPose& pose, const Cloud& cloud,
                             const GripperModel& gripper) {
  const double half_w = pose.width / 2.0;
  const double ht = gripper.finger_thickness;
  const double hh = gripper.finger_height / 2.0;
  const double z_tip = -gripper.baseline_offset;
  const double z_root = z_tip + gripper.finger_length;
  const Mat3 rt = pose.R.transposed();
  for (const Vec3& p : cloud.points) {
    const Vec3 q = rt * (p - pose.t);
    if (std::abs(q.y) > hh) continue;
    const bool finger_band = q.z >= z_tip && q.z <= z_root;
    if (finger_band && std::abs(q.x) >= half_w && std::abs(q.x) <= half_w + ht) return true;
    const bool plate_band = q.z > z_root && q.z <= 0.0;
    if (plate_band && std::abs(q.x) <= half_w + ht) return true;
  }
  return false;
}

inline ContactGrasp transform_contact(const Rigid& tf, const ContactGrasp& g) {
  return {tf.apply(g.contact), tf.rotate(g.approach), tf.rotate(g.baseline), g.width};
}

inline GraspPose transform_pose(const Rigid& tf, const GraspPose& pose) {
  GraspPose out = pose;
  out.R = tf.R * pose.R;
  out.t = tf.apply(pose.t);
  return out;
}

}  // namespace pcf

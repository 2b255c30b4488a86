#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace pcf;
using Catch::Matchers::WithinAbs;

namespace {

ContactGrasp random_contact(Rng& rng, const GripperModel& gripper) {
  const Vec3 z1 = uniform_unit_vector(rng);
  Vec3 z2 = uniform_unit_vector(rng);
  while (std::abs(z1.dot(z2)) > 0.99) z2 = uniform_unit_vector(rng);
  const auto [b, a] = orthonormalize(z1, z2);
  return {{uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, 0.2, 0.8)},
          a,
          b,
          uniform(rng, 0.0, gripper.max_width)};
}

}  // namespace

TEST_CASE("orthonormalize") {
  SECTION("gram-schmidt residual") {
    const auto [b, a] = orthonormalize({0, 2, 0}, {1, 1, 0});
    CHECK_THAT(b.x, WithinAbs(0.0, 1e-12));
    CHECK_THAT(b.y, WithinAbs(1.0, 1e-12));
    CHECK_THAT(a.x, WithinAbs(1.0, 1e-12));
    CHECK_THAT(a.y, WithinAbs(0.0, 1e-12));
    CHECK_THAT(a.dot(b), WithinAbs(0.0, 1e-9));
  }
  SECTION("already orthonormal") {
    const auto [b, a] = orthonormalize({1, 0, 0}, {0, 1, 0});
    CHECK_THAT((b - Vec3{1, 0, 0}).norm(), WithinAbs(0.0, 1e-12));
    CHECK_THAT((a - Vec3{0, 1, 0}).norm(), WithinAbs(0.0, 1e-12));
  }
  SECTION("parallel inputs are degenerate") {
    try {
      orthonormalize({3, 0, 0}, {6, 0, 0});
      FAIL("expected degenerate rotation error");
    } catch (const Error& e) {
      CHECK(e.code() == "DEGENERATE_ROTATION");
    }
    CHECK_THROWS_AS(orthonormalize({0, 0, 0}, {1, 0, 0}), Error);
  }
  SECTION("scale invariance") {
    Rng rng(42);
    for (int i = 0; i < 50; ++i) {
      const Vec3 z1 = uniform_unit_vector(rng) * uniform(rng, 0.5, 2.0);
      Vec3 z2 = uniform_unit_vector(rng);
      while (std::abs(z1.normalized().dot(z2)) > 0.99) z2 = uniform_unit_vector(rng);
      const auto [b1, a1] = orthonormalize(z1, z2);
      const auto [b2, a2] = orthonormalize(z1 * 3.7, z2 * 0.21);
      CHECK_THAT((b1 - b2).norm(), WithinAbs(0.0, 1e-12));
      CHECK_THAT((a1 - a2).norm(), WithinAbs(0.0, 1e-12));
    }
  }
}

TEST_CASE("contact_to_pose") {
  GripperModel gripper;
  SECTION("direct substitution") {
    const ContactGrasp g{{0.10, 0.0, 0.50}, {0, 0, 1}, {0, 1, 0}, 0.06};
    const GraspPose pose = contact_to_pose(g, gripper);
    CHECK_THAT(pose.t.x, WithinAbs(0.10, 1e-12));
    CHECK_THAT(pose.t.y, WithinAbs(0.03, 1e-12));
    CHECK_THAT(pose.t.z, WithinAbs(0.60, 1e-12));
  }
  SECTION("identity rotation case") {
    const ContactGrasp g{{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, 0.0};
    const GraspPose pose = contact_to_pose(g, gripper);
    CHECK(pose.R.orthonormality_error() < 1e-12);
    CHECK_THAT(pose.R.det(), WithinAbs(1.0, 1e-12));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) CHECK_THAT(pose.R(r, c), WithinAbs(r == c ? 1.0 : 0.0, 1e-12));
  }
  SECTION("zero width lands on the approach ray") {
    const ContactGrasp g{{0.2, 0.1, 0.4}, {0, 0, 1}, {1, 0, 0}, 0.0};
    const GraspPose pose = contact_to_pose(g, gripper);
    CHECK_THAT((pose.t - (g.contact + g.approach * gripper.baseline_offset)).norm(),
               WithinAbs(0.0, 1e-15));
  }
}

TEST_CASE("contact_to_pose yields rotations on random inputs") {
  Rng rng(7);
  GripperModel gripper;
  for (int i = 0; i < 2000; ++i) {
    const GraspPose pose = contact_to_pose(random_contact(rng, gripper), gripper);
    REQUIRE(pose.R.orthonormality_error() < 1e-9);
    REQUIRE(std::abs(pose.R.det() - 1.0) < 1e-9);
  }
}

TEST_CASE("control points") {
  GripperModel gripper;
  SECTION("identity pose keeps the layout") {
    GraspPose pose;  // identity R, zero t
    const auto pts = control_points_world(pose, gripper);
    for (size_t i = 0; i < 5; ++i)
      CHECK_THAT((pts[i] - gripper.control_points[i]).norm(), WithinAbs(0.0, 1e-15));
  }
  SECTION("pure translation shifts all points") {
    GraspPose pose;
    pose.t = {0, 0, 0.1};
    const auto pts = control_points_world(pose, gripper);
    for (size_t i = 0; i < 5; ++i)
      CHECK_THAT((pts[i] - gripper.control_points[i] - Vec3{0, 0, 0.1}).norm(),
                 WithinAbs(0.0, 1e-15));
  }
  SECTION("flip about the approach swaps fingers and fixes the axis points") {
    Rng rng(12);
    const GraspPose pose = contact_to_pose(random_contact(rng, gripper), gripper);
    const auto pts = control_points_world(pose, gripper);
    const auto flipped = control_points_world(flip_about_approach(pose), gripper);
    CHECK_THAT((pts[0] - flipped[0]).norm(), WithinAbs(0.0, 1e-12));  // base on the axis
    CHECK_THAT((pts[1] - flipped[2]).norm(), WithinAbs(0.0, 1e-12));
    CHECK_THAT((pts[2] - flipped[1]).norm(), WithinAbs(0.0, 1e-12));
    CHECK_THAT((pts[3] - flipped[4]).norm(), WithinAbs(0.0, 1e-12));
    CHECK_THAT((pts[4] - flipped[3]).norm(), WithinAbs(0.0, 1e-12));
  }
  SECTION("isometry: pairwise distances preserved") {
    Rng rng(13);
    const GraspPose pose = contact_to_pose(random_contact(rng, gripper), gripper);
    const auto pts = control_points_world(pose, gripper);
    for (size_t i = 0; i < 5; ++i)
      for (size_t j = i + 1; j < 5; ++j) {
        const double want = (gripper.control_points[i] - gripper.control_points[j]).norm();
        CHECK_THAT((pts[i] - pts[j]).norm(), WithinAbs(want, 1e-12));
      }
  }
}

TEST_CASE("adds distance") {
  GripperModel gripper;
  Rng rng(21);
  SECTION("zero against itself and its flip") {
    for (int i = 0; i < 200; ++i) {
      const GraspPose pose = contact_to_pose(random_contact(rng, gripper), gripper);
      CHECK_THAT(adds_distance(pose, pose, gripper), WithinAbs(0.0, 1e-9));
      CHECK_THAT(adds_distance(flip_about_approach(pose), pose, gripper),
                 WithinAbs(0.0, 1e-9));
    }
  }
  SECTION("pure translation sums per point") {
    const GraspPose gt = contact_to_pose(random_contact(rng, gripper), gripper);
    GraspPose moved = gt;
    moved.t += {0.01, 0.0, 0.0};
    CHECK_THAT(adds_distance(moved, gt, gripper, PoseDistance::sum), WithinAbs(0.05, 1e-9));
    CHECK_THAT(adds_distance(moved, gt, gripper, PoseDistance::stacked),
               WithinAbs(std::sqrt(5.0 * 0.01 * 0.01), 1e-9));
  }
  SECTION("symmetric in the gt flip") {
    for (int i = 0; i < 50; ++i) {
      const GraspPose a = contact_to_pose(random_contact(rng, gripper), gripper);
      const GraspPose b = contact_to_pose(random_contact(rng, gripper), gripper);
      CHECK_THAT(adds_distance(a, b, gripper),
                 WithinAbs(adds_distance(a, flip_about_approach(b), gripper), 1e-9));
    }
  }
}

TEST_CASE("width bins") {
  GripperModel gripper;
  CHECK(width_to_bin(0.0, gripper) == 0);
  CHECK(width_to_bin(0.08, gripper) == 9);  // boundary clamps
  CHECK(width_to_bin(0.037, gripper) == 4);
  CHECK_THAT(bin_to_width(4, gripper), WithinAbs(0.036, 1e-12));
  CHECK_THROWS_AS(width_to_bin(-0.01, gripper), Error);
  CHECK_THROWS_AS(width_to_bin(0.09, gripper), Error);

  // every bin center maps back to its own bin
  for (int bin = 0; bin < kWidthBins; ++bin)
    CHECK(width_to_bin(bin_to_width(bin, gripper), gripper) == bin);
}

TEST_CASE("gripper collision boxes") {
  GripperModel gripper;
  Rng rng(5);
  const GraspPose pose = contact_to_pose(random_contact(rng, gripper), gripper);
  const double mid_z = -gripper.baseline_offset + gripper.finger_length / 2.0;

  SECTION("empty cloud never collides") {
    CHECK_FALSE(gripper_collides(pose, Cloud{}, gripper));
  }
  SECTION("point in the opening corridor is free") {
    Cloud c;
    c.points = {pose.R * Vec3{0.0, 0.0, mid_z} + pose.t};
    CHECK_FALSE(gripper_collides(pose, c, gripper));
  }
  SECTION("point inside a finger collides") {
    const double finger_x = pose.width / 2.0 + gripper.finger_thickness / 2.0;
    Cloud c;
    c.points = {pose.R * Vec3{finger_x, 0.0, mid_z} + pose.t};
    CHECK(gripper_collides(pose, c, gripper));
    c.points = {pose.R * Vec3{-finger_x, 0.0, mid_z} + pose.t};
    CHECK(gripper_collides(pose, c, gripper));
  }
  SECTION("point behind the back plate is free") {
    Cloud c;
    c.points = {pose.R * Vec3{0.0, 0.0, 0.05} + pose.t};
    CHECK_FALSE(gripper_collides(pose, c, gripper));
  }
}

TEST_CASE("grasp pose json") {
  Rng rng(33);
  GripperModel gripper;
  GraspPose pose = contact_to_pose(random_contact(rng, gripper), gripper);
  pose.score = 0.77;
  const Json j = to_json(pose);
  const GraspPose back = pose_from_json(j);
  CHECK_THAT((back.t - pose.t).norm(), WithinAbs(0.0, 1e-15));
  CHECK(back.score == pose.score);
  CHECK(back.width == pose.width);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(back.R(r, c) == pose.R(r, c));

  const ContactGrasp g = random_contact(rng, gripper);
  const ContactGrasp gback = contact_from_json(to_json(g));
  CHECK_THAT((gback.contact - g.contact).norm(), WithinAbs(0.0, 1e-15));
  CHECK_THAT((gback.approach - g.approach).norm(), WithinAbs(0.0, 1e-15));
}

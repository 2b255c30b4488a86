#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "support.hpp"

using namespace pcf;
using Catch::Matchers::WithinAbs;

namespace {

Cloud hemisphere(size_t n, double radius, Rng& rng) {
  // upper half (z >= 0) of a sphere centered at the origin
  Cloud c;
  c.points.reserve(n);
  while (c.points.size() < n) {
    Vec3 p = uniform_unit_vector(rng) * radius;
    if (p.z >= 0.0) c.points.push_back(p);
  }
  return c;
}

}  // namespace

TEST_CASE("mirror completion") {
  SECTION("centroid point is a fixed point of the reflection") {
    Cloud partial;
    partial.points = {{0.1, 0.2, 0.3}};
    const CompletionRequest req{partial, {0, 0, 1}, 1};
    const Cloud out = mirror_complete(req);
    REQUIRE(out.size() == 1);
    CHECK_THAT((out.points[0] - partial.points[0]).norm(), WithinAbs(0.0, 1e-15));
  }
  SECTION("two points mirrored through their midplane map to each other") {
    Cloud partial;
    partial.points = {{0, 0, 1}, {0, 0, 0}};
    const CompletionRequest req{partial, {0, 0, 1}, 2};
    const Cloud out = mirror_complete(req);
    REQUIRE(out.size() == 2);
    // reflections across z=0.5: (0,0,1)->(0,0,0), (0,0,0)->(0,0,1); the union
    // collapses to the same two points
    for (const Vec3& p : out.points) {
      const bool is_either = (p - Vec3{0, 0, 1}).norm() < 1e-12 || p.norm() < 1e-12;
      CHECK(is_either);
    }
  }
  SECTION("hemisphere mirrors into an approximate full sphere") {
    Rng rng(17);
    const double radius = 0.1;
    Cloud partial = hemisphere(1024, radius, rng);
    const CompletionRequest req{partial, {0, 0, 1}, 1024};
    const Cloud out = mirror_complete(req);
    REQUIRE(out.size() == 1024);
    CHECK_THAT(out.centroid().norm(), WithinAbs(0.0, 0.05 * radius));
    // output spans both halves
    size_t below = 0;
    double max_r = 0.0;
    const Vec3 c = partial.centroid();
    for (const Vec3& p : out.points) {
      below += p.z < c.z - 1e-6;
      max_r = std::max(max_r, p.norm());
    }
    CHECK(below > 200);
    CHECK(max_r <= radius + 1e-9);
  }
  SECTION("reflection is an involution") {
    Rng rng(3);
    Cloud partial;
    for (int i = 0; i < 64; ++i)
      partial.points.push_back({uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1),
                                uniform(rng, -0.1, 0.1)});
    const Vec3 c = partial.centroid();
    const Vec3 u = uniform_unit_vector(rng);
    const auto reflect = [&](const Vec3& p) { return p + 2.0 * (c - p).dot(u) * u; };
    for (const Vec3& p : partial.points) {
      const Vec3 twice = reflect(reflect(p));
      CHECK_THAT((twice - p).norm(), WithinAbs(0.0, 1e-12));
    }
  }
  SECTION("rotational equivariance with a co-rotated view direction") {
    Rng rng(29);
    Cloud partial;
    for (int i = 0; i < 128; ++i)
      partial.points.push_back({uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05),
                                uniform(rng, 0.0, 0.08)});
    const Vec3 u = uniform_unit_vector(rng);
    const Mat3 R = random_rotation(rng);

    const Cloud out = mirror_complete({partial, u, 128});
    Cloud rotated;
    for (const Vec3& p : partial.points) rotated.points.push_back(R * p);
    const Cloud out_rot = mirror_complete({rotated, R * u, 128});
    REQUIRE(out.size() == out_rot.size());
    for (size_t i = 0; i < out.size(); ++i)
      CHECK_THAT((R * out.points[i] - out_rot.points[i]).norm(), WithinAbs(0.0, 1e-9));
  }
  SECTION("count and unit-direction validation") {
    Cloud partial;
    partial.points = {{0, 0, 0}, {1, 1, 1}};
    CHECK_THROWS_AS(mirror_complete({partial, {0, 0, 1}, 5}), Error);
    CHECK_THROWS_AS(mirror_complete({partial, {0, 0, 2}, 2}), Error);
  }
}

TEST_CASE("file-backed completion") {
  const auto dir = std::filesystem::temp_directory_path() / "pcfgrasp_test_completion";
  std::filesystem::create_directories(dir);
  Rng rng(4);

  SECTION("exact count passes through") {
    Cloud c;
    for (int i = 0; i < 32; ++i)
      c.points.push_back({uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)});
    const std::string path = (dir / "exact.ply").string();
    save_ply(path, c);
    const Cloud out = load_completion(path, 32);
    REQUIRE(out.size() == 32);
    for (size_t i = 0; i < 32; ++i)
      CHECK_THAT((out.points[i] - c.points[i]).norm(), WithinAbs(0.0, 1e-15));
  }
  SECTION("oversized cloud is FPS-downsampled") {
    Cloud c;
    for (int i = 0; i < 128; ++i)
      c.points.push_back({uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)});
    const std::string path = (dir / "big.ply").string();
    save_ply(path, c);
    const Cloud out = load_completion(path, 32);
    REQUIRE(out.size() == 32);
    const Cloud expect = c.subset(oracle::fps_brute(c, 32, 0));
    for (size_t i = 0; i < 32; ++i)
      CHECK_THAT((out.points[i] - expect.points[i]).norm(), WithinAbs(0.0, 1e-15));
  }
  SECTION("undersized cloud is a validation error") {
    Cloud c;
    for (int i = 0; i < 8; ++i) c.points.push_back({0.1 * i, 0, 0});
    const std::string path = (dir / "small.ply").string();
    save_ply(path, c);
    try {
      load_completion(path, 32);
      FAIL("expected validation error");
    } catch (const Error& e) {
      CHECK(e.code() == "VALIDATION");
    }
  }
  SECTION("missing file is an io error") {
    CHECK_THROWS_AS(load_completion((dir / "nope.ply").string(), 8), Error);
  }
}

TEST_CASE("provider selection") {
  CHECK(make_completion_provider("mirror")->describe() == "mirror");
  CHECK(make_completion_provider("file:/tmp/x.ply")->describe() == "file:/tmp/x.ply");
  CHECK_THROWS_AS(make_completion_provider("pcn"), Error);
}

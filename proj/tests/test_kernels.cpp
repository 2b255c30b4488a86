#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "support.hpp"

using namespace pcf;

namespace {

Cloud cloud_1d(const std::vector<double>& xs) {
  Cloud c;
  for (double x : xs) c.points.push_back({x, 0.0, 0.0});
  return c;
}

Cloud random_cloud(size_t n, Rng& rng, double extent = 0.5) {
  Cloud c;
  c.points.reserve(n);
  for (size_t i = 0; i < n; ++i)
    c.points.push_back({uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                        uniform(rng, -extent, extent)});
  return c;
}

}  // namespace

TEST_CASE("fps basics") {
  SECTION("greedy max-min on a line") {
    const Cloud c = cloud_1d({0, 1, 2, 9, 10});
    CHECK(fps(c, 3, 0) == std::vector<int>{0, 4, 2});
  }
  SECTION("n = N is a permutation") {
    Rng rng(3);
    const Cloud c = random_cloud(17, rng);
    auto picks = fps(c, 17, 5);
    std::sort(picks.begin(), picks.end());
    for (int i = 0; i < 17; ++i) CHECK(picks[static_cast<size_t>(i)] == i);
  }
  SECTION("identical points pick start then lowest other index") {
    Cloud c;
    for (int i = 0; i < 4; ++i) c.points.push_back({0.5, 0.5, 0.5});
    CHECK(fps(c, 2, 0) == std::vector<int>{0, 1});
    CHECK(fps(c, 2, 2) == std::vector<int>{2, 0});
  }
  SECTION("argument errors") {
    const Cloud c = cloud_1d({0, 1});
    CHECK_THROWS_AS(fps(c, 3, 0), Error);
    CHECK_THROWS_AS(fps(c, 1, 5), Error);
    CHECK_THROWS_AS(fps(Cloud{}, 1, 0), Error);
  }
}

TEST_CASE("fps equals the brute-force oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const size_t n = 2 + rng() % 63;
    const Cloud c = random_cloud(n, rng);
    const size_t count = 1 + rng() % n;
    for (size_t start = 0; start < n; start += 1 + n / 7) {
      CAPTURE(trial, n, count, start);
      REQUIRE(fps(c, count, start) == oracle::fps_brute(c, count, start));
    }
  }
}

TEST_CASE("fps has no duplicates on distinct points") {
  Rng rng(99);
  const Cloud c = random_cloud(300, rng);
  auto picks = fps(c, 300, 0);
  std::sort(picks.begin(), picks.end());
  CHECK(std::adjacent_find(picks.begin(), picks.end()) == picks.end());
}

TEST_CASE("query_ball basics") {
  SECTION("single neighbor with padding") {
    Cloud src;
    src.points = {{0.01, 0, 0}, {1, 0, 0}};
    Cloud centers;
    centers.points = {{0, 0, 0}};
    const NeighborGroup g = query_ball(src, centers, 0.04, 4);
    CHECK(g.valid_count == std::vector<int>{1});
    CHECK(g.neighbor_idx == std::vector<int>{0, 0, 0, 0});
  }
  SECTION("radius covering everything keeps the first k in scan order") {
    Rng rng(1);
    const Cloud src = random_cloud(20, rng, 0.01);
    Cloud centers;
    centers.points = {{0, 0, 0}};
    const NeighborGroup g = query_ball(src, centers, 10.0, 5);
    CHECK(g.neighbor_idx == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(g.valid_count == std::vector<int>{5});
  }
  SECTION("empty ball self-references the center") {
    Cloud src;
    src.points = {{5, 5, 5}, {6, 6, 6}};
    Cloud centers;
    centers.points = {{0, 0, 0}, {5, 5, 5}};
    const NeighborGroup g = query_ball(src, centers, 0.01, 3);
    CHECK(g.valid_count[0] == 0);
    CHECK(g.neighbor_idx[0] == 0);  // center 0's own index
    CHECK(g.valid_count[1] == 1);
  }
  SECTION("argument validation") {
    Cloud src;
    src.points = {{0, 0, 0}};
    CHECK_THROWS_AS(query_ball(src, src, -1.0, 4), Error);
    CHECK_THROWS_AS(query_ball(src, src, 0.1, 0), Error);
  }
}

TEST_CASE("query_ball and knn match naive all-pairs") {
  Rng rng(31337);
  for (int trial = 0; trial < 12; ++trial) {
    const size_t n = 16 + rng() % 497;  // crosses the grid-hash threshold
    const Cloud src = random_cloud(n, rng, 0.2);
    const Cloud centers = random_cloud(24, rng, 0.2);
    const double radius = uniform(rng, 0.02, 0.15);
    const size_t k = 1 + rng() % 8;

    const NeighborGroup ball = query_ball(src, centers, radius, k);
    const NeighborGroup nn = knn(src, centers, k);
    for (size_t ci = 0; ci < centers.size(); ++ci) {
      CAPTURE(trial, n, radius, k, ci);
      auto expect = oracle::ball_brute(src, centers.points[ci], radius);
      const size_t valid = std::min(expect.size(), k);
      REQUIRE(ball.valid_count[ci] == static_cast<int>(valid));
      for (size_t j = 0; j < valid; ++j) REQUIRE(ball.neighbor(ci, j) == expect[j]);
      // padding repeats the first valid neighbor
      for (size_t j = valid; j < k && valid > 0; ++j)
        REQUIRE(ball.neighbor(ci, j) == expect[0]);

      const auto nn_expect = oracle::knn_brute(src, centers.points[ci], k);
      for (size_t j = 0; j < k; ++j) REQUIRE(nn.neighbor(ci, j) == nn_expect[j]);
    }
  }
}

TEST_CASE("query_ball respects the radius") {
  Rng rng(555);
  const Cloud src = random_cloud(400, rng, 0.3);
  const Cloud centers = random_cloud(40, rng, 0.3);
  const double radius = 0.1;
  const NeighborGroup g = query_ball(src, centers, radius, 16);
  for (size_t ci = 0; ci < centers.size(); ++ci)
    for (int j = 0; j < g.valid_count[ci]; ++j) {
      const double d =
          (src.points[static_cast<size_t>(g.neighbor(ci, static_cast<size_t>(j)))] -
           centers.points[ci])
              .norm();
      CHECK(d <= radius + 1e-12);
    }
}

TEST_CASE("knn basics") {
  SECTION("self match") {
    Cloud src;
    src.points = {{1, 2, 3}, {4, 5, 6}};
    Cloud center;
    center.points = {{4, 5, 6}};
    CHECK(knn(src, center, 1).neighbor_idx == std::vector<int>{1});
  }
  SECTION("1-D ordering") {
    const Cloud src = cloud_1d({0, 3, 10});
    const Cloud center = cloud_1d({2});
    CHECK(knn(src, center, 2).neighbor_idx == std::vector<int>{1, 0});
  }
  SECTION("duplicate nearest points break ties by lowest index") {
    const Cloud src = cloud_1d({1, 1, 1});
    const Cloud center = cloud_1d({0});
    CHECK(knn(src, center, 2).neighbor_idx == std::vector<int>{0, 1});
  }
  SECTION("k larger than the source errors") {
    const Cloud src = cloud_1d({0});
    CHECK_THROWS_AS(knn(src, src, 2), Error);
  }
}

TEST_CASE("label association at the 2 mm rule") {
  Cloud contacts;
  contacts.points = {{0, 0, 0}, {1, 0, 0}};
  SECTION("1.5 mm away is positive") {
    Cloud labels;
    labels.points = {{0.0015, 0, 0}};
    const auto m = associate_labels(contacts, labels);
    CHECK(m[0].positive);
    CHECK(m[0].label_index == 0);
    CHECK_FALSE(m[1].positive);
  }
  SECTION("2.5 mm away is negative") {
    Cloud labels;
    labels.points = {{0.0025, 0, 0}};
    const auto m = associate_labels(contacts, labels);
    CHECK_FALSE(m[0].positive);
    CHECK(m[0].label_index == -1);
  }
  SECTION("empty label set is all negative") {
    const auto m = associate_labels(contacts, Cloud{});
    CHECK_FALSE(m[0].positive);
    CHECK_FALSE(m[1].positive);
  }
  SECTION("nearest label wins") {
    Cloud labels;
    labels.points = {{0.0019, 0, 0}, {0.0005, 0, 0}};
    const auto m = associate_labels(contacts, labels);
    CHECK(m[0].label_index == 1);
  }
}

TEST_CASE("ply round trip") {
  Rng rng(8);
  Cloud c = random_cloud(50, rng, 0.4);
  c.frame = Frame::robot;
  for (size_t i = 0; i < c.size(); ++i) c.normals.push_back(uniform_unit_vector(rng));

  const auto dir = std::filesystem::temp_directory_path() / "pcfgrasp_test_ply";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "cloud.ply").string();
  save_ply(path, c);
  const Cloud back = load_ply(path);

  REQUIRE(back.size() == c.size());
  CHECK(back.frame == Frame::robot);
  for (size_t i = 0; i < c.size(); ++i) {
    CHECK(back.points[i].x == c.points[i].x);  // %.17g is lossless for doubles
    CHECK(back.points[i].y == c.points[i].y);
    CHECK(back.points[i].z == c.points[i].z);
    CHECK(back.normals[i].x == c.normals[i].x);
  }

  CHECK_THROWS_AS(load_ply((dir / "missing.ply").string()), Error);
}

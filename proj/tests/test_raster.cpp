#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bevfuse/raster.hpp"
#include "bevfuse/rng.hpp"

using namespace bevfuse;

namespace {

// Naive reference: for every cell, rescan the whole cloud in input order and
// aggregate with the same compensated summation. Bit-comparable by design.
PseudoImage naive_rasterize(const PointCloud& pcd, const RasterConfig& cfg) {
  PseudoImage out;
  out.h = cfg.grid_h;
  out.w = cfg.grid_w;
  out.cells.assign(static_cast<size_t>(cfg.grid_h) * cfg.grid_w * 4, 0.0);
  out.occupancy.assign(static_cast<size_t>(cfg.grid_h) * cfg.grid_w, 0);
  for (int i = 0; i < cfg.grid_h; ++i) {
    for (int j = 0; j < cfg.grid_w; ++j) {
      std::vector<double> zs;
      for (const auto& p : pcd.points) {
        double fi = std::floor((p.x() - cfg.origin_x) / cfg.cell_size);
        double fj = std::floor((p.y() - cfg.origin_y) / cfg.cell_size);
        if (fi == i && fj == j) zs.push_back(p.z());
      }
      if (zs.empty()) continue;
      std::sort(zs.begin(), zs.end());
      size_t idx = static_cast<size_t>(i) * cfg.grid_w + j;
      double n = static_cast<double>(zs.size());
      double mean = compensated_sum(zs) / n;
      std::vector<double> sq(zs.size());
      for (size_t k = 0; k < zs.size(); ++k)
        sq[k] = (zs[k] - mean) * (zs[k] - mean);
      out.cells[idx * 4 + 0] = mean;
      out.cells[idx * 4 + 1] = compensated_sum(sq) / n;
      out.cells[idx * 4 + 2] = *std::max_element(zs.begin(), zs.end());
      out.cells[idx * 4 + 3] = *std::min_element(zs.begin(), zs.end());
      out.occupancy[idx] = 1;
    }
  }
  return out;
}

PointCloud random_cloud(Rng& rng, size_t n, double span, double z_span) {
  PointCloud pcd;
  pcd.points.reserve(n);
  for (size_t i = 0; i < n; ++i)
    pcd.points.emplace_back(rng.uniform(-span, span), rng.uniform(-span, span),
                            rng.uniform(-z_span, z_span));
  return pcd;
}

bool bit_equal(const PseudoImage& a, const PseudoImage& b) {
  return a.h == b.h && a.w == b.w && a.cells == b.cells &&
         a.occupancy == b.occupancy;
}

RasterConfig small_cfg() {
  RasterConfig cfg;
  cfg.cell_size = 1.0;
  cfg.grid_h = 16;
  cfg.grid_w = 16;
  cfg.origin_x = -8.0;
  cfg.origin_y = -8.0;
  return cfg;
}

}  // namespace

TEST_CASE("empty cloud rasterizes to all-zero with zero occupancy") {
  PointCloud empty;
  auto img = rasterize(empty, small_cfg());
  for (double v : img.cells) CHECK(v == 0.0);
  for (auto o : img.occupancy) CHECK(o == 0);
  CHECK(img.dropped_points == 0);
}

TEST_CASE("two points in one cell give the documented statistics") {
  PointCloud pcd;
  pcd.points = {{0.1, 0.2, 1.0}, {0.3, 0.4, 3.0}};
  RasterConfig cfg;
  cfg.cell_size = 1.0;
  cfg.grid_h = 4;
  cfg.grid_w = 4;
  cfg.origin_x = 0.0;
  cfg.origin_y = 0.0;
  auto img = rasterize(pcd, cfg);
  CHECK(img.at(0, 0, 0) == doctest::Approx(2.0));  // mean
  CHECK(img.at(0, 0, 1) == doctest::Approx(1.0));  // population variance
  CHECK(img.at(0, 0, 2) == doctest::Approx(3.0));  // max
  CHECK(img.at(0, 0, 3) == doctest::Approx(1.0));  // min
  CHECK(img.occupied(0, 0));
}

TEST_CASE("single point has zero variance") {
  PointCloud pcd;
  pcd.points = {{0.5, 0.5, 5.0}};
  RasterConfig cfg;
  cfg.cell_size = 1.0;
  cfg.grid_h = 2;
  cfg.grid_w = 2;
  cfg.origin_x = 0.0;
  cfg.origin_y = 0.0;
  auto img = rasterize(pcd, cfg);
  CHECK(img.at(0, 0, 0) == 5.0);
  CHECK(img.at(0, 0, 1) == 0.0);
  CHECK(img.at(0, 0, 2) == 5.0);
  CHECK(img.at(0, 0, 3) == 5.0);
}

TEST_CASE("out-of-grid points are dropped and counted") {
  PointCloud pcd;
  pcd.points = {{100.0, 0.0, 1.0}, {0.0, 0.0, 2.0}, {0.0, -100.0, 3.0}};
  auto img = rasterize(pcd, small_cfg());
  CHECK(img.dropped_points == 2);
}

TEST_CASE("bit-exact match with the naive per-cell oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    auto cfg = small_cfg();
    auto pcd = random_cloud(rng, 2000, 9.0, 50.0);
    CHECK(bit_equal(rasterize(pcd, cfg), naive_rasterize(pcd, cfg)));
  }
}

TEST_CASE("permutation invariance is bit exact") {
  Rng rng(102);
  auto cfg = small_cfg();
  auto pcd = random_cloud(rng, 1500, 7.0, 20.0);
  auto base = rasterize(pcd, cfg);

  PointCloud shuffled = pcd;
  for (size_t i = shuffled.points.size(); i > 1; --i)
    std::swap(shuffled.points[i - 1],
              shuffled.points[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
  CHECK(bit_equal(rasterize(shuffled, cfg), base));
}

TEST_CASE("translation by whole cells shifts the occupied pattern exactly") {
  Rng rng(103);
  auto cfg = small_cfg();
  auto pcd = random_cloud(rng, 400, 4.0, 10.0);
  auto base = rasterize(pcd, cfg);

  int k = 2, m = -1;
  PointCloud moved = pcd;
  for (auto& p : moved.points)
    p += Eigen::Vector3d(k * cfg.cell_size, m * cfg.cell_size, 0.0);
  auto shifted = rasterize(moved, cfg);

  for (int i = 0; i < cfg.grid_h; ++i) {
    for (int j = 0; j < cfg.grid_w; ++j) {
      int si = i + k, sj = j + m;
      if (si < 0 || sj < 0 || si >= cfg.grid_h || sj >= cfg.grid_w) continue;
      CHECK(shifted.occupied(si, sj) == base.occupied(i, j));
      if (base.occupied(i, j))
        for (int ch = 0; ch < 4; ++ch)
          CHECK(shifted.at(si, sj, ch) == base.at(i, j, ch));
    }
  }
}

TEST_CASE("occupied cells satisfy min <= mean <= max and variance semantics") {
  Rng rng(104);
  auto cfg = small_cfg();
  auto pcd = random_cloud(rng, 3000, 8.0, 30.0);
  auto img = rasterize(pcd, cfg);
  for (int i = 0; i < cfg.grid_h; ++i)
    for (int j = 0; j < cfg.grid_w; ++j) {
      if (!img.occupied(i, j)) continue;
      CHECK(img.at(i, j, 3) <= img.at(i, j, 0) + 1e-12);
      CHECK(img.at(i, j, 0) <= img.at(i, j, 2) + 1e-12);
      CHECK(img.at(i, j, 1) >= 0.0);
      if (img.at(i, j, 2) == img.at(i, j, 3)) CHECK(img.at(i, j, 1) == 0.0);
    }
}

TEST_CASE("batch rasterization equals element-wise single calls") {
  Rng rng(105);
  auto cfg = small_cfg();
  std::vector<std::vector<PointCloud>> clouds(3);
  for (int t = 0; t < 3; ++t)
    for (int v = 0; v < 2; ++v)
      clouds[static_cast<size_t>(t)].push_back(random_cloud(rng, 300, 7.0, 5.0));
  auto batch = rasterize_batch(clouds, cfg);
  REQUIRE(batch.size() == 6);
  for (int t = 0; t < 3; ++t)
    for (int v = 0; v < 2; ++v)
      CHECK(bit_equal(batch[static_cast<size_t>(t * 2 + v)],
                      rasterize(clouds[static_cast<size_t>(t)][static_cast<size_t>(v)], cfg)));
}

TEST_CASE("singleton batch equals single rasterize") {
  Rng rng(106);
  auto cfg = small_cfg();
  std::vector<std::vector<PointCloud>> clouds(1);
  clouds[0].push_back(random_cloud(rng, 100, 6.0, 2.0));
  auto batch = rasterize_batch(clouds, cfg);
  REQUIRE(batch.size() == 1);
  CHECK(bit_equal(batch[0], rasterize(clouds[0][0], cfg)));
}

TEST_CASE("ragged batch raises ShapeMismatch") {
  auto cfg = small_cfg();
  std::vector<std::vector<PointCloud>> clouds(2);
  clouds[0].resize(2);
  clouds[1].resize(1);
  CHECK_THROWS_AS(rasterize_batch(clouds, cfg), ShapeMismatch);
}

TEST_CASE("pseudo camera projects raster cells onto matching pixels") {
  RasterConfig cfg;
  cfg.cell_size = 2.0;
  cfg.grid_h = 32;
  cfg.grid_w = 32;
  cfg.origin_x = -32.0;
  cfg.origin_y = -32.0;
  auto cal = pseudo_camera_calibration(cfg, 50.0, "lidar_front");
  cal.validate();
  // a world point inside cell (i, j) must land at pixel (u=j-ish, v=i-ish)
  Eigen::Vector3d world(5.0, -7.0, 0.0);
  double fi = (world.x() - cfg.origin_x) / cfg.cell_size;
  double fj = (world.y() - cfg.origin_y) / cfg.cell_size;
  auto px = project_world_to_image(cal, world);
  CHECK(px.u == doctest::Approx(fj).epsilon(1e-12));
  CHECK(px.v == doctest::Approx(fi).epsilon(1e-12));
}

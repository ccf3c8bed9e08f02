#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <set>

#include "bevfuse/geometry.hpp"
#include "bevfuse/rng.hpp"

using namespace bevfuse;

namespace {

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  return Eigen::AngleAxisd(rng.uniform(-3.0, 3.0), axis).toRotationMatrix();
}

CameraCalibration random_calibration(Rng& rng) {
  CameraCalibration cal;
  double f = rng.uniform(100.0, 500.0);
  cal.intrinsic << f, 0, rng.uniform(-50, 50),
                   0, f * rng.uniform(0.8, 1.2), rng.uniform(-50, 50),
                   0, 0, 1;
  cal.extrinsic = random_rotation(rng);
  cal.center = Eigen::Vector3d(rng.uniform(-10, 10), rng.uniform(-10, 10),
                               rng.uniform(-10, 10));
  cal.view_id = "rand";
  return cal;
}

// independent back-projection with explicit inverses
Eigen::Vector3d back_project(const CameraCalibration& cal, const ImagePoint& p) {
  Eigen::Vector3d homog(p.u * p.depth, p.v * p.depth, p.depth);
  return cal.extrinsic.inverse() * (cal.intrinsic.inverse() * homog) +
         cal.center;
}

}  // namespace

TEST_CASE("projection with identity calibration applies the perspective divide") {
  CameraCalibration cal;
  auto p = project_world_to_image(cal, {2, 4, 2});
  CHECK(p.u == doctest::Approx(1.0));
  CHECK(p.v == doctest::Approx(2.0));
  CHECK(p.depth == doctest::Approx(2.0));
}

TEST_CASE("optical axis point at unit depth lands on the principal point") {
  Rng rng(7);
  CameraCalibration cal = random_calibration(rng);
  Eigen::Vector3d world =
      cal.center + cal.extrinsic.transpose() * (cal.intrinsic.inverse() *
                                                Eigen::Vector3d(0, 0, 1));
  auto p = project_world_to_image(cal, world);
  CHECK(p.u == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.v == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.depth == doctest::Approx(1.0));
}

TEST_CASE("behind-camera and singular calibrations raise") {
  CameraCalibration cal;
  CHECK_THROWS_AS(project_world_to_image(cal, {0, 0, -1}), BehindCamera);
  cal.intrinsic(0, 0) = 0;
  cal.intrinsic(0, 1) = 0;
  CHECK_THROWS_AS(project_world_to_image(cal, {0, 0, 1}), SingularCalibration);
  CHECK_THROWS_AS(pixel_to_ray(cal, 0, 0), SingularCalibration);
}

TEST_CASE("projection round trip against the explicit-inverse oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    CameraCalibration cal = random_calibration(rng);
    // point with positive depth: walk forward along a random in-frustum ray
    Eigen::Vector3d cam_dir(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0);
    double depth = rng.uniform(0.5, 200.0);
    Eigen::Vector3d world =
        cal.center + cal.extrinsic.transpose() * (cam_dir * depth);
    auto p = project_world_to_image(cal, world);
    Eigen::Vector3d rec = back_project(cal, p);
    CHECK((rec - world).norm() <= 1e-9 * std::max(1.0, world.norm()));
  }
}

TEST_CASE("pixel_to_ray identity geometry") {
  CameraCalibration cal;
  Eigen::Vector3d r = pixel_to_ray(cal, 1, 2);
  Eigen::Vector3d expect = Eigen::Vector3d(1, 2, 1) / std::sqrt(6.0);
  CHECK((r - expect).norm() < 1e-12);
  Eigen::Vector3d principal = pixel_to_ray(cal, 0, 0);
  CHECK((principal - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("pixel_to_ray applies the inverse extrinsic rotation") {
  CameraCalibration cal;
  cal.extrinsic = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ())
                      .toRotationMatrix();
  Eigen::Vector3d r = pixel_to_ray(cal, 0, 0);
  Eigen::Vector3d expect = cal.extrinsic.inverse() * Eigen::Vector3d(0, 0, 1);
  CHECK((r - expect).norm() < 1e-12);
}

TEST_CASE("rays are unit norm and rotate contravariantly with the extrinsic") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    CameraCalibration cal = random_calibration(rng);
    double u = rng.uniform(-100, 100), v = rng.uniform(-100, 100);
    Eigen::Vector3d r = pixel_to_ray(cal, u, v);
    CHECK(std::abs(r.norm() - 1.0) < 1e-12);

    Eigen::Matrix3d rot = random_rotation(rng);
    CameraCalibration cal2 = cal;
    cal2.extrinsic = cal.extrinsic * rot;  // rotate the camera by rot^T
    Eigen::Vector3d r2 = pixel_to_ray(cal2, u, v);
    CHECK((r2 - rot.transpose() * r).norm() < 1e-9);
  }
}

TEST_CASE("bev query directions, defaults and degenerate grids") {
  QueryGrid qg(25, 25);
  qg.pseudo_extrinsic = Eigen::Matrix3d::Identity();
  auto dirs = bev_query_directions(qg);
  REQUIRE(dirs.size() == 625);
  // center cell has centered grid coordinate (0, 0)
  Eigen::Vector3d center = dirs[12 * 25 + 12];
  CHECK((center - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
  // corner: column 0 -> b_x = -1, row 0 -> b_y = +1 (north edge)
  CHECK((dirs[0] - Eigen::Vector3d(-1, 1, 1)).norm() < 1e-12);

  std::set<std::array<double, 3>> unique;
  for (const auto& d : dirs) unique.insert({d.x(), d.y(), d.z()});
  CHECK(unique.size() == 625);

  QueryGrid one(1, 1);
  one.pseudo_extrinsic = Eigen::Matrix3d::Identity();
  auto single = bev_query_directions(one);
  REQUIRE(single.size() == 1);
  CHECK((single[0] - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("default pseudo-camera looks along -z") {
  QueryGrid qg(25, 25);
  auto dirs = bev_query_directions(qg);
  Eigen::Vector3d center = dirs[12 * 25 + 12];
  CHECK((center - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
  CHECK(std::abs(qg.pseudo_extrinsic.determinant() - 1.0) < 1e-12);
}

TEST_CASE("pose_difference identity and commuting translation") {
  Pose a;
  a.rotation = Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  a.translation = {1, 2, 3};
  auto d = pose_difference(a, a);
  CHECK((d.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(d.translation.norm() < 1e-12);

  Pose base, moved;
  moved.translation = {5, 0, 0};
  auto dt = pose_difference(base, moved);
  CHECK((dt.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK((dt.translation - Eigen::Vector3d(5, 0, 0)).norm() < 1e-12);
}

TEST_CASE("pose_difference composes back to the target pose") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Pose a, b;
    a.rotation = random_rotation(rng);
    a.translation = {rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)};
    b.rotation = random_rotation(rng);
    b.translation = {rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)};
    auto d = pose_difference(a, b);
    Pose composed = compose(d, a);
    CHECK((composed.rotation - b.rotation).norm() < 1e-9);
    CHECK((composed.translation - b.translation).norm() < 1e-9);
  }
}

TEST_CASE("90-degree rotation then translation, verified numerically") {
  Pose a;
  Pose b;
  b.rotation = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ())
                   .toRotationMatrix();
  b.translation = {3, -1, 0};
  auto d = pose_difference(a, b);
  // applying d to points expressed through pose a matches pose b
  Eigen::Vector3d body(2, 5, 1);
  Eigen::Vector3d via_d = d.apply(a.to_world(body));
  CHECK((via_d - b.to_world(body)).norm() < 1e-12);
}

TEST_CASE("bev grid center and example cells") {
  BevGrid g;
  auto w = bev_cell_to_world(g, 100, 100);
  CHECK(w.x() == doctest::Approx(0.0));
  CHECK(w.y() == doctest::Approx(0.0));

  auto cell = world_to_bev_cell(g, 0.0, 30.0);
  CHECK(cell.row == 100);
  CHECK(cell.col == 110);

  CHECK_THROWS_AS(world_to_bev_cell(g, 301.0, 0.0), OutOfMap);
  CHECK_FALSE(try_world_to_bev_cell(g, 0.0, -301.0).has_value());
}

TEST_CASE("bev grid mappings are mutual inverses on the cell lattice") {
  BevGrid g;
  g.cells_h = 64;
  g.cells_w = 48;
  g.center_row = 32;
  g.center_col = 24;
  g.meters_per_cell = 2.5;
  for (int r = 0; r < g.cells_h; r += 7)
    for (int c = 0; c < g.cells_w; c += 5) {
      auto w = bev_cell_to_world(g, r, c);
      auto cell = world_to_bev_cell(g, w.x(), w.y());
      CHECK(cell.row == r);
      CHECK(cell.col == c);
    }
}

TEST_CASE("rows run south, columns run east") {
  BevGrid g;
  auto north = bev_cell_to_world(g, 50, 100);
  CHECK(north.x() > 0);  // above center row -> +x (north)
  auto east = bev_cell_to_world(g, 100, 150);
  CHECK(east.y() > 0);
}

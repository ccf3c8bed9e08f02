#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "bevfuse/ops.hpp"
#include "bevfuse/temporal.hpp"
#include "gradcheck.hpp"

using namespace bevfuse;
using namespace bevfuse::testutil;

namespace {
BevGrid meta_9() {
  BevGrid g;
  g.cells_h = 9;
  g.cells_w = 9;
  g.center_row = 4;
  g.center_col = 4;
  g.meters_per_cell = 2.0;
  return g;
}

Pose yawed(double yaw, double x, double y) {
  Pose p;
  p.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  p.translation = {x, y, 0};
  return p;
}
}  // namespace

TEST_CASE("zero motion alignment is the identity") {
  Rng rng(71);
  Tensor map = random_tensor({3, 9, 9}, rng, false);
  Pose p = yawed(0.4, 12.0, -3.0);
  Tensor out = align_bev(map, p, p, meta_9());
  auto a = map.values();
  auto b = out.values();
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-6));
}

TEST_CASE("one-cell northward translation shifts rows exactly") {
  Rng rng(72);
  auto meta = meta_9();
  Tensor map = random_tensor({2, 9, 9}, rng, false);
  Pose then = yawed(0, 0, 0);
  Pose now = yawed(0, meta.meters_per_cell, 0);  // moved one cell north
  Tensor out = align_bev(map, then, now, meta);
  // static content slides one row south; border row reads zero
  for (int64_t c = 0; c < 2; ++c) {
    for (int64_t r = 1; r < 9; ++r)
      for (int64_t col = 0; col < 9; ++col)
        CHECK(out.at({c, r, col}) ==
              doctest::Approx(map.at({c, r - 1, col})).epsilon(1e-9));
    for (int64_t col = 0; col < 9; ++col) CHECK(out.at({c, 0, col}) == 0.0);
  }
}

TEST_CASE("90-degree yaw moves a hot cell to the rotated index") {
  auto meta = meta_9();
  std::vector<double> v(81, 0.0);
  // hot cell two cells east of center: world (0, +4)
  v[4 * 9 + 6] = 1.0;
  Tensor map = Tensor::from_vector({1, 9, 9}, v);

  // now-frame is yawed +90 degrees about z relative to then
  Pose then = yawed(0, 0, 0);
  Pose now = yawed(M_PI / 2, 0, 0);
  Tensor out = align_bev(map, then, now, meta);

  // world (0, 4) in then-body; now-body coords = Rz(-90) * (0,4) = (4, 0),
  // i.e. four meters north = two cells above center
  CHECK(out.at({0, 2, 4}) == doctest::Approx(1.0).epsilon(1e-6));
  double total = 0;
  for (double x : out.values()) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("alignment composes within bilinear tolerance") {
  Rng rng(73);
  auto meta = meta_9();
  // smooth map: low-frequency ramp
  std::vector<double> v(81);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c)
      v[static_cast<size_t>(r * 9 + c)] =
          0.5 + 0.03 * r + 0.02 * c + 0.001 * r * c;
  Tensor map = Tensor::from_vector({1, 9, 9}, v);

  Pose pa = yawed(0.0, 0, 0);
  Pose pb = yawed(0.1, 1.0, 0.5);
  Pose pc = yawed(0.2, 2.0, 1.0);
  Tensor via = align_bev(align_bev(map, pa, pb, meta), pb, pc, meta);
  Tensor direct = align_bev(map, pa, pc, meta);
  // compare away from the border where out-of-map zeros differ
  for (int64_t r = 2; r < 7; ++r)
    for (int64_t c = 2; c < 7; ++c)
      CHECK(via.at({0, r, c}) ==
            doctest::Approx(direct.at({0, r, c})).epsilon(1e-3));
}

TEST_CASE("temporal fuse collapses time and keeps the spatial grid") {
  ParamStore params;
  Rng rng(74);
  TemporalConv conv(4, 4, 3, params, rng, "tconv");
  AlignedStack stack;
  for (int i = 0; i < 3; ++i)
    stack.maps.push_back(random_tensor({4, 5, 6}, rng, false));
  Tensor out = conv.fuse(stack);
  CHECK(out.shape() == Shape{4, 5, 6});
}

TEST_CASE("averaging kernel over identical maps matches the single-map response") {
  ParamStore params;
  Rng rng(75);
  // kernel that averages over time with identity channel mixing
  Tensor kernel = Tensor::zeros({2, 2, 3, 1, 1}, true);
  {
    auto kv = kernel.values();
    // kernel[o][c][t] = (o == c) / 3
    for (int o = 0; o < 2; ++o)
      for (int t = 0; t < 3; ++t)
        kv[static_cast<size_t>(((o * 2 + o) * 3 + t))] = 1.0 / 3.0;
  }
  Tensor map = random_tensor({2, 4, 4}, rng, false);
  AlignedStack stack;
  stack.maps = {map, map, map};
  Tensor out = temporal_fuse(stack, kernel, Tensor());
  auto a = map.values();
  auto b = out.values();
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
}

TEST_CASE("stack depth must match the kernel time extent") {
  ParamStore params;
  Rng rng(76);
  TemporalConv conv(2, 2, 3, params, rng, "tconv");
  AlignedStack stack;
  stack.maps = {Tensor::zeros({2, 4, 4}), Tensor::zeros({2, 4, 4})};
  CHECK_THROWS_AS(conv.fuse(stack), ShapeMismatch);
}

TEST_CASE("gradients flow through alignment and temporal convolution") {
  ParamStore params;
  Rng rng(77);
  auto meta = meta_9();
  TemporalConv conv(2, 2, 2, params, rng, "tconv");
  Pose then = yawed(0.15, 1.0, -0.5);
  Pose now = yawed(0.0, 0.0, 0.0);

  std::vector<Tensor> inputs = {random_tensor({2, 9, 9}, rng),
                                random_tensor({2, 9, 9}, rng), conv.kernel,
                                conv.bias};
  double err = grad_check(
      [&](auto& t) {
        AlignedStack stack;
        stack.maps = {align_bev(t[0], then, now, meta), t[1]};
        return temporal_fuse(stack, t[2], t[3]);
      },
      inputs, rng);
  CHECK(err < 1e-4);
}

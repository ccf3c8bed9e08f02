#include "bevfuse/temporal.hpp"

#include <cmath>

#include "bevfuse/ops.hpp"

namespace bevfuse {

Tensor align_bev(const Tensor& map, const Pose& pose_then,
                 const Pose& pose_now, const BevGrid& meta) {
  if (map.rank() != 3) throw ShapeMismatch("align_bev expects [d, h, w]");
  int64_t h = map.dim(1), w = map.dim(2);
  if (h != meta.cells_h || w != meta.cells_w)
    throw ShapeMismatch("align_bev grid metadata does not match the map");

  PlanarMotion motion = planar_motion(pose_now, pose_then);
  std::vector<double> coords;
  coords.reserve(static_cast<size_t>(h * w * 2));
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      Eigen::Vector2d now = bev_cell_to_world(meta, static_cast<int>(r),
                                              static_cast<int>(c));
      Eigen::Vector2d then = motion.apply(now);
      coords.push_back(meta.center_row - then.x() / meta.meters_per_cell);
      coords.push_back(meta.center_col + then.y() / meta.meters_per_cell);
    }
  }
  return grid_sample_bilinear(map, coords, h, w);
}

AlignedStack align_stack(const std::vector<Tensor>& maps,
                         const std::vector<Pose>& poses, const BevGrid& meta) {
  if (maps.size() != poses.size())
    throw ShapeMismatch("one pose per map required");
  if (maps.empty()) throw ShapeMismatch("empty temporal stack");
  AlignedStack out;
  out.poses_used = poses;
  const Pose& now = poses.back();
  for (size_t i = 0; i < maps.size(); ++i) {
    if (i + 1 == maps.size())
      out.maps.push_back(maps[i]);  // current instant needs no warp
    else
      out.maps.push_back(align_bev(maps[i], poses[i], now, meta));
  }
  return out;
}

Tensor temporal_fuse(const AlignedStack& stack, const Tensor& kernel,
                     const Tensor& bias) {
  if (stack.maps.empty()) throw ShapeMismatch("empty temporal stack");
  int64_t t = static_cast<int64_t>(stack.maps.size());
  if (kernel.rank() != 5 || kernel.dim(2) != t)
    throw ShapeMismatch("temporal kernel depth must equal the stack depth");
  int64_t d = stack.maps[0].dim(0);
  int64_t h = stack.maps[0].dim(1);
  int64_t w = stack.maps[0].dim(2);

  std::vector<Tensor> slices;
  slices.reserve(static_cast<size_t>(t));
  for (const auto& m : stack.maps) {
    if (m.dim(0) != d || m.dim(1) != h || m.dim(2) != w)
      throw ShapeMismatch("temporal stack maps disagree in shape");
    slices.push_back(reshape(m, {d, 1, h, w}));
  }
  Tensor x = t == 1 ? slices[0] : concat(slices, 1);  // [d, t, h, w]
  Tensor y = conv3d(x, kernel);                       // [d_out, 1, h', w']
  Tensor flat = reshape(y, {y.dim(0), y.dim(2), y.dim(3)});
  return bias.defined() ? add(flat, bias) : flat;
}

TemporalConv::TemporalConv(int d_m, int d_out, int t, ParamStore& params,
                           Rng& rng, const std::string& prefix) {
  double bound = xavier_bound(d_m * t, d_out);
  kernel = params.make(prefix + ".w", {d_out, d_m, t, 1, 1},
                       uniform_init(-bound, bound), rng);
  bias = params.make_zeros(prefix + ".b", {d_out, 1, 1});
}

Tensor TemporalConv::fuse(const AlignedStack& stack) const {
  return temporal_fuse(stack, kernel, bias);
}

}  // namespace bevfuse
